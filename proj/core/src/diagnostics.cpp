#include "nnpanel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include "nnpanel/error.hpp"
#include "nnpanel/objective.hpp"

namespace nnpanel {

namespace {

struct SpanBases {
  MatrixXd ql;
  MatrixXd qf;
};

SpanBases bases_for(const std::vector<MatrixXd>& X, const MatrixRef& lambda0,
                    const MatrixRef& f0) {
  if (X.empty()) fail(ErrorKind::domain, "identification margin needs K >= 1");
  for (const MatrixXd& x : X) {
    if (x.rows() != lambda0.rows() || x.cols() != f0.rows()) {
      fail(ErrorKind::dimension_mismatch,
           "regressor shape differs from loadings/factors");
    }
    require_finite(x, "regressor");
  }
  return {column_basis(lambda0), column_basis(f0)};
}

double gap_with_bases(const std::vector<MatrixXd>& X, const SpanBases& sb,
                      const VectorXd& alpha) {
  MatrixXd a = MatrixXd::Zero(X.front().rows(), X.front().cols());
  for (std::size_t k = 0; k < X.size(); ++k) a += alpha(k) * X[k];
  const double scale =
      std::sqrt(static_cast<double>(a.rows()) * static_cast<double>(a.cols()));
  MatrixXd m = annihilate(sb.ql, a);
  m -= (m * sb.qf) * sb.qf.transpose();
  const double outside = schatten_norm(m, SchattenOrder::nuclear);
  double inside = 0.0;
  if (sb.ql.cols() > 0 && sb.qf.cols() > 0) {
    // |P_l A P_f|_1 = |Ql' A Qf|_1 for orthonormal bases.
    inside = schatten_norm(MatrixXd(sb.ql.transpose() * a * sb.qf),
                           SchattenOrder::nuclear);
  }
  return (outside - inside) / scale;
}

std::vector<VectorXd> sphere_points(Eigen::Index K, int n) {
  std::vector<VectorXd> pts;
  pts.reserve(n);
  if (K == 2) {
    for (int i = 0; i < n; ++i) {
      const double t = std::numbers::pi * (i + 0.5) / n;
      VectorXd v(2);
      v << std::cos(t), std::sin(t);
      pts.push_back(v);
    }
  } else if (K == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      VectorXd v(3);
      v << r * std::cos(golden * i), r * std::sin(golden * i), z;
      pts.push_back(v);
    }
  } else {
    std::mt19937_64 rng(20240101);
    std::normal_distribution<double> normal;
    for (int i = 0; i < n; ++i) {
      VectorXd v(K);
      for (Eigen::Index k = 0; k < K; ++k) v(k) = normal(rng);
      pts.push_back(v / v.norm());
    }
  }
  return pts;
}

}  // namespace

double identification_gap(const std::vector<MatrixXd>& X,
                          const MatrixRef& lambda0, const MatrixRef& f0,
                          const VectorXd& alpha) {
  const SpanBases sb = bases_for(X, lambda0, f0);
  if (alpha.size() != static_cast<Eigen::Index>(X.size()) ||
      !(alpha.norm() > 0.0)) {
    fail(ErrorKind::dimension_mismatch, "alpha must be a nonzero K-vector");
  }
  return gap_with_bases(X, sb, alpha / alpha.norm());
}

IdentificationReport identification_margin(const std::vector<MatrixXd>& X,
                                           const MatrixRef& lambda0,
                                           const MatrixRef& f0, int grid) {
  const SpanBases sb = bases_for(X, lambda0, f0);
  const Eigen::Index K = static_cast<Eigen::Index>(X.size());
  IdentificationReport rep;
  if (K == 1) {
    rep.argmin_alpha = VectorXd::Ones(1);
    rep.margin = gap_with_bases(X, sb, rep.argmin_alpha);
    rep.grid_resolution = 1;
    return rep;
  }
  const int n = grid > 0 ? grid : static_cast<int>(512 * K);
  rep.grid_resolution = n;
  rep.margin = std::numeric_limits<double>::infinity();
  for (const VectorXd& alpha : sphere_points(K, n)) {
    const double g = gap_with_bases(X, sb, alpha);
    if (g < rep.margin) {
      rep.margin = g;
      rep.argmin_alpha = alpha;
    }
  }
  // Coordinate polish on the sphere with a shrinking step.
  double h = std::numbers::pi / n;
  int sweeps = 0;
  while (h > 1e-9) {
    bool improved = false;
    for (Eigen::Index k = 0; k < K; ++k) {
      for (const double sign : {1.0, -1.0}) {
        VectorXd trial = rep.argmin_alpha;
        trial(k) += sign * h;
        trial /= trial.norm();
        const double g = gap_with_bases(X, sb, trial);
        if (g < rep.margin) {
          rep.margin = g;
          rep.argmin_alpha = trial;
          improved = true;
        }
      }
    }
    if (!improved || ++sweeps == 64) {
      h *= 0.5;
      sweeps = 0;
    }
  }
  return rep;
}

RscReport rsc_lower_bound(const MatrixRef& X, const MatrixRef& lambda0,
                          const MatrixRef& f0) {
  if (X.rows() != lambda0.rows() || X.cols() != f0.rows()) {
    fail(ErrorKind::dimension_mismatch,
         "regressor shape differs from loadings/factors");
  }
  if (lambda0.cols() != f0.cols()) {
    fail(ErrorKind::dimension_mismatch, "loadings and factors differ in rank");
  }
  require_finite(X, "regressor");
  RscReport rep;
  rep.r0_used = static_cast<int>(lambda0.cols());
  if (rep.r0_used == 0) {
    rep.note = "R0 = 0: the restricted cone is {0}, bound holds trivially";
    return rep;
  }
  const SpanBases sb = bases_for({MatrixXd(X)}, lambda0, f0);
  MatrixXd m = annihilate(sb.ql, X);
  m -= (m * sb.qf) * sb.qf.transpose();
  const VectorXd s = singular_values(m);
  const double outside =
      schatten_norm(MatrixXd(X - m), SchattenOrder::spectral);
  const double nt = static_cast<double>(X.rows()) * X.cols();
  const double sqrt_nt = std::sqrt(nt);
  const double c = 1.0 / (3.0 * std::sqrt(2.0 * rep.r0_used));
  const Eigen::Index qmax =
      std::min(X.rows(), X.cols()) - static_cast<Eigen::Index>(rep.r0_used);
  if (qmax < 1) {
    rep.note = "min(N,T) <= R0: no restricted directions";
    return rep;
  }
  // suffix[q] = sum_{r>=q} s_r^2 and prefix[q] = sum_{r<q} s_r (1-based q).
  VectorXd suffix = VectorXd::Zero(qmax + 2);
  for (Eigen::Index q = qmax; q >= 1; --q) {
    suffix(q) = suffix(q + 1) + s(q - 1) * s(q - 1);
  }
  double prefix = 0.0;  // sum_{r=1}^{q-2} s_r
  for (Eigen::Index q = 1; q <= qmax; ++q) {
    const double sq = s(q - 1);
    if (q >= 3) prefix += s(q - 3);
    RscStep st;
    st.q = static_cast<int>(q);
    st.a = ((q - 1) * sq * sq + suffix(q)) / nt;
    const double spread = q >= 3 ? prefix - static_cast<double>(q - 2) * sq : 0.0;
    st.b = (c * spread - outside) / sqrt_nt;
    rep.q_schedule.push_back(st);
    const double bp = std::max(0.0, st.b);
    rep.mu_bound = std::min(rep.mu_bound, st.a + bp * bp);
  }
  return rep;
}

LocalMinima find_local_minima(const std::vector<double>& v) {
  LocalMinima out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] < v[i - 1] && v[i] < v[i + 1]) {
      out.strict.push_back(i);
    } else if (v[i] <= v[i - 1] && v[i] <= v[i + 1]) {
      out.plateaus.push_back(i);
    }
  }
  return out;
}

ScanTable objective_scan(const PanelData& data,
                         const std::vector<VectorXd>& beta_grid, int R,
                         double psi, int threads) {
  data.validate();
  const Eigen::Index q = std::min(data.N(), data.T());
  if (R < 0 || R > q) fail(ErrorKind::domain, "R outside [0, min(N,T)]");
  if (!(psi > 0.0) || !std::isfinite(psi)) {
    fail(ErrorKind::domain, "psi must be a positive finite number");
  }
  for (const VectorXd& b : beta_grid) {
    if (b.size() != data.K()) {
      fail(ErrorKind::dimension_mismatch, "grid point length differs from K");
    }
  }
  ScanTable table;
  table.beta = beta_grid;
  table.R = R;
  table.psi = psi;
  const std::size_t n = beta_grid.size();
  table.ls.assign(n, 0.0);
  table.penalized.assign(n, 0.0);
  const double nt = static_cast<double>(data.N()) * data.T();
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      const VectorXd s = singular_values(combine(data, beta_grid[i]));
      table.ls[i] = profile_ls_from_spectrum(s, R, nt);
      table.penalized[i] = penalized_from_spectrum(s, psi, nt);
    }
  };
  const std::size_t workers =
      static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (std::thread& t : pool) t.join();
  }
  table.ls_minima = find_local_minima(table.ls);
  table.penalized_minima = find_local_minima(table.penalized);
  return table;
}

std::vector<VectorXd> scalar_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) {
    fail(ErrorKind::domain, "grid needs step > 0 and hi >= lo");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
  std::vector<VectorXd> grid;
  grid.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid.push_back(VectorXd::Constant(1, lo + static_cast<double>(i) * step));
  }
  return grid;
}

void write_scan_csv(std::ostream& out, const ScanTable& table) {
  const Eigen::Index K = table.beta.empty() ? 0 : table.beta.front().size();
  for (Eigen::Index k = 0; k < K; ++k) out << "beta" << (k + 1) << ',';
  out << "L_R,Q_psi\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < table.beta.size(); ++i) {
    for (Eigen::Index k = 0; k < K; ++k) {
      put(table.beta[i](k));
      out << ',';
    }
    put(table.ls[i]);
    out << ',';
    put(table.penalized[i]);
    out << '\n';
  }
}

}  // namespace nnpanel
