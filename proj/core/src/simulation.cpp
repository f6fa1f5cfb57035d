#include "nnpanel/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <thread>

#include "nnpanel/bias_correction.hpp"
#include "nnpanel/error.hpp"
#include "nnpanel/tuning.hpp"

namespace nnpanel {

namespace {

MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows,
                       Eigen::Index cols, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> dist(mean, sd);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

// Rows are iid bivariate normal with unit variances and correlation rho.
MatrixXd correlated_pairs(std::mt19937_64& rng, Eigen::Index rows, double rho) {
  const MatrixXd z = normal_matrix(rng, rows, 2);
  MatrixXd out(rows, 2);
  out.col(0) = z.col(0);
  out.col(1) = rho * z.col(0) + std::sqrt(1.0 - rho * rho) * z.col(1);
  return out;
}

// 2 chi^2(1) draws.
VectorXd scaled_chi2(std::mt19937_64& rng, Eigen::Index n) {
  const VectorXd z = normal_matrix(rng, n, 1);
  return 2.0 * z.array().square().matrix();
}

const std::vector<std::string>& estimator_groups() {
  static const std::vector<std::string> groups = {"POLS", "LS",   "NN*",
                                                  "NNpen", "POST", "ALT"};
  return groups;
}

std::vector<std::string> column_names(const ExperimentConfig& cfg,
                                      const std::vector<bool>& on) {
  std::vector<std::string> names;
  if (on[0]) names.push_back("POLS");
  if (on[1]) names.push_back("LS");
  if (on[2]) names.push_back("NN*");
  if (on[3]) names.push_back("NNpen");
  if (on[4]) {
    for (int s = 1; s <= cfg.post_steps; ++s) {
      names.push_back("POST(" + std::to_string(s) + ")");
    }
  }
  if (on[5]) {
    for (int s = 1; s <= cfg.alt_steps; ++s) {
      names.push_back("ALT(" + std::to_string(s) + ")");
    }
  }
  return names;
}

struct Replication {
  bool ok = false;
  std::string error;
  std::vector<VectorXd> estimates;  // in column order
  int r_hat = -1;
  double psi_hat = std::numeric_limits<double>::quiet_NaN();
};

Replication run_one(const DgpSpec& spec, std::uint64_t rep,
                    const ExperimentConfig& cfg, const std::vector<bool>& on) {
  Replication out;
  try {
    const GeneratedPanel g = generate(spec, rep);
    const PanelData& d = g.data;
    if (on[0]) out.estimates.push_back(pooled_ols(d).beta);
    const bool need_tune = on[1] || on[2] || on[3] || on[4] || on[5];
    if (!need_tune) {
      out.ok = true;
      return out;
    }
    const TuningReport tune = select_psi(d, cfg.r_max, cfg.solver);
    out.r_hat = tune.r_hat;
    out.psi_hat = tune.psi_hat;
    if (on[1]) {
      out.estimates.push_back(
          fit_ls_local(d, cfg.ls_factors, tune.beta_star, cfg.solver).beta);
    }
    if (on[2]) out.estimates.push_back(tune.beta_star);
    // psi_hat = 0 means the residual at beta_star is exactly of rank
    // <= r_max; NNpen and ALT then take their psi -> 0 value beta_star.
    const bool degenerate = !(tune.psi_hat > 0.0);
    std::optional<VectorXd> penalized;
    if (on[3] || on[5]) {
      penalized = degenerate ? tune.beta_star
                             : fit_nn_penalized(d, tune.psi_hat, tune.beta_star,
                                                cfg.solver)
                                   .beta;
    }
    if (on[3]) out.estimates.push_back(*penalized);
    if (on[4]) {
      const EstimationResult post =
          post_iterate(d, tune.r_hat, tune.beta_star, cfg.post_steps);
      for (int s = 1; s <= cfg.post_steps; ++s) {
        out.estimates.push_back(post.beta_path[s]);
      }
    }
    if (on[5]) {
      if (degenerate) {
        for (int s = 1; s <= cfg.alt_steps; ++s) {
          out.estimates.push_back(*penalized);
        }
      } else {
        const EstimationResult alt = alt_bc_iterate(
            d, tune.psi_hat, tune.r_hat, *penalized, cfg.alt_steps, cfg.solver);
        for (int s = 1; s <= cfg.alt_steps; ++s) {
          out.estimates.push_back(alt.beta_path[s]);
        }
      }
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = "replication " + std::to_string(rep) + ": " + e.what();
  }
  return out;
}

}  // namespace

const EstimatorSummary* ExperimentResult::find(const std::string& name) const {
  for (const EstimatorSummary& s : estimators) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::mc_design:
      return "mc_design";
    case DgpKind::nonconvex_demo:
      return "nonconvex_demo";
    case DgpKind::custom:
      return "custom";
  }
  return "unknown";
}

DgpKind parse_dgp_kind(const std::string& name) {
  if (name == "mc_design" || name == "mc-design") return DgpKind::mc_design;
  if (name == "nonconvex_demo" || name == "nonconvex-demo") {
    return DgpKind::nonconvex_demo;
  }
  if (name == "custom") return DgpKind::custom;
  fail(ErrorKind::invalid_input, "unknown design '" + name + "'");
}

VectorXd default_beta0(const DgpSpec& spec) {
  switch (spec.kind) {
    case DgpKind::mc_design:
      return VectorXd::Ones(2);
    case DgpKind::nonconvex_demo:
      return VectorXd::Constant(1, 2.0);
    case DgpKind::custom:
      return VectorXd::Ones(spec.regressors);
  }
  return VectorXd();
}

void validate_dgp(const DgpSpec& spec) {
  if (spec.N < 2 || spec.T < 2) {
    fail(ErrorKind::invalid_input, "designs need N >= 2 and T >= 2");
  }
  Eigen::Index K = 0;
  switch (spec.kind) {
    case DgpKind::mc_design:
      K = 2;
      break;
    case DgpKind::nonconvex_demo:
      K = 1;
      break;
    case DgpKind::custom:
      if (spec.regressors < 0 || spec.factors < 0 ||
          spec.factors > std::min(spec.N, spec.T)) {
        fail(ErrorKind::invalid_input, "custom design needs regressors >= 0 "
                                       "and 0 <= factors <= min(N,T)");
      }
      K = spec.regressors;
      break;
  }
  if (spec.beta0.size() != 0 && spec.beta0.size() != K) {
    fail(ErrorKind::invalid_input, "beta0 has " +
                                       std::to_string(spec.beta0.size()) +
                                       " entries, design has K = " +
                                       std::to_string(K));
  }
  if (!(spec.error_scale >= 0.0) || !std::isfinite(spec.error_scale)) {
    fail(ErrorKind::invalid_input, "error_scale must be finite and >= 0");
  }
  if (!(spec.loading_scale >= 0.0) || !std::isfinite(spec.loading_scale)) {
    fail(ErrorKind::invalid_input, "loading_scale must be finite and >= 0");
  }
}

std::mt19937_64 replication_stream(std::uint64_t seed, std::uint64_t replication,
                                   std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication),
                    static_cast<std::uint32_t>(replication >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

GeneratedPanel generate(const DgpSpec& spec, std::uint64_t replication) {
  validate_dgp(spec);
  std::mt19937_64 rng = replication_stream(spec.seed, replication);
  const Eigen::Index N = spec.N, T = spec.T;
  GeneratedPanel g;
  g.beta0 = spec.beta0.size() ? spec.beta0 : default_beta0(spec);
  PanelData& d = g.data;

  switch (spec.kind) {
    case DgpKind::mc_design: {
      const MatrixXd f_all = normal_matrix(rng, T + 1, 2);  // row 0 presample
      g.lambda0 = normal_matrix(rng, N, 2, 1.0, 1.0);
      const MatrixXd lambda_x = normal_matrix(rng, N, 2, 1.0, 1.0);
      const MatrixXd ex = normal_matrix(rng, N, T);
      g.E = spec.error_scale * normal_matrix(rng, N, T);
      g.f0 = f_all.bottomRows(T);
      const MatrixXd f_sum = g.f0 + f_all.topRows(T);
      const MatrixXd x = MatrixXd::Ones(N, T) + ex +
                         (g.lambda0 + lambda_x) * f_sum.transpose();
      g.gamma0 = g.lambda0 * g.f0.transpose();
      d.X = {MatrixXd::Ones(N, T), x};
      d.Y = g.beta0(0) * d.X[0] + g.beta0(1) * x + g.gamma0 + g.E;
      break;
    }
    case DgpKind::nonconvex_demo: {
      g.lambda0 = correlated_pairs(rng, N, 0.5);
      g.f0 = correlated_pairs(rng, T, 0.5);
      const VectorXd lambda_x = scaled_chi2(rng, N);
      const VectorXd f_x = scaled_chi2(rng, T);
      const MatrixXd ex = normal_matrix(rng, N, T);
      g.E = spec.error_scale * normal_matrix(rng, N, T);
      const MatrixXd x = 0.04 * ex + g.lambda0.col(0) * g.f0.col(1).transpose() +
                         lambda_x * f_x.transpose();
      g.gamma0 = g.lambda0 * g.f0.transpose();
      d.X = {x};
      d.Y = g.beta0(0) * x + g.gamma0 + g.E;
      break;
    }
    case DgpKind::custom: {
      const int R = spec.factors;
      g.lambda0 = normal_matrix(rng, N, R, 0.0, spec.loading_scale);
      g.f0 = normal_matrix(rng, T, R, 0.0, spec.loading_scale);
      g.gamma0 = g.lambda0 * g.f0.transpose();
      for (int k = 0; k < spec.regressors; ++k) {
        const MatrixXd lx = normal_matrix(rng, N, 1);
        const MatrixXd fx = normal_matrix(rng, T, 1);
        MatrixXd x = lx * fx.transpose() + normal_matrix(rng, N, T);
        if (R >= 1) x += 0.5 * g.lambda0.col(0) * g.f0.col(0).transpose();
        d.X.push_back(std::move(x));
      }
      const MatrixXd e = normal_matrix(rng, N, T);
      MatrixXd index = g.gamma0;
      for (int k = 0; k < spec.regressors; ++k) index += g.beta0(k) * d.X[k];
      if (spec.outcome == OutcomeKind::probit) {
        g.E = e;
        d.Y = ((index + e).array() > 0.0).cast<double>().matrix();
      } else {
        g.E = spec.error_scale * e;
        d.Y = index + g.E;
      }
      break;
    }
  }
  d.ensure_labels();
  return g;
}

ExperimentResult run_experiment(const DgpSpec& spec,
                                const ExperimentConfig& cfg) {
  validate_dgp(spec);
  if (cfg.replications < 1) {
    fail(ErrorKind::invalid_input, "replications must be >= 1");
  }
  if (cfg.post_steps < 1 || cfg.alt_steps < 1 || cfg.r_max < 0 ||
      cfg.ls_factors < 0) {
    fail(ErrorKind::invalid_input,
         "post/alt steps must be >= 1 and r_max, ls_factors >= 0");
  }
  std::vector<bool> on(estimator_groups().size(), cfg.estimators.empty());
  for (const std::string& name : cfg.estimators) {
    const auto& groups = estimator_groups();
    const auto it = std::find(groups.begin(), groups.end(), name);
    if (it == groups.end()) {
      fail(ErrorKind::invalid_input, "unknown estimator '" + name + "'");
    }
    on[it - groups.begin()] = true;
  }
  const std::vector<std::string> names = column_names(cfg, on);

  const auto start = std::chrono::steady_clock::now();
  std::vector<Replication> reps(cfg.replications);
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int r = next++; r < cfg.replications; r = next++) {
      reps[r] = run_one(spec, static_cast<std::uint64_t>(r), cfg, on);
    }
  };
  int threads = cfg.threads > 0
                    ? cfg.threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, cfg.replications);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult res;
  res.spec = spec;
  res.beta0 = spec.beta0.size() ? spec.beta0 : default_beta0(spec);
  res.replications = cfg.replications;
  const Eigen::Index K = res.beta0.size();
  for (const std::string& name : names) {
    EstimatorSummary s;
    s.name = name;
    s.bias = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
    s.std = s.bias;
    s.rmse = s.bias;
    res.estimators.push_back(std::move(s));
  }
  for (const Replication& r : reps) {
    if (!r.ok) {
      ++res.failures;
      res.failure_messages.push_back(r.error);
    } else if (r.r_hat >= 0) {
      ++res.r_hat_frequency[r.r_hat];
    }
    res.psi_hat.push_back(r.psi_hat);
    for (std::size_t j = 0; j < names.size(); ++j) {
      res.estimators[j].estimates.push_back(
          r.ok ? r.estimates[j]
               : VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN()));
    }
  }
  for (EstimatorSummary& s : res.estimators) {
    VectorXd sum = VectorXd::Zero(K), sq = VectorXd::Zero(K);
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if (!reps[r].ok) continue;
      const VectorXd dev = s.estimates[r] - res.beta0;
      sum += dev;
      sq += dev.array().square().matrix();
      ++s.count;
    }
    if (s.count == 0) continue;
    s.bias = sum / s.count;
    s.rmse = (sq / s.count).array().sqrt().matrix();
    if (s.count > 1) {
      VectorXd ss = VectorXd::Zero(K);
      for (std::size_t r = 0; r < reps.size(); ++r) {
        if (!reps[r].ok) continue;
        ss += (s.estimates[r] - res.beta0 - s.bias).array().square().matrix();
      }
      s.std = (ss / (s.count - 1)).array().sqrt().matrix();
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  return res;
}

std::vector<ExperimentResult> run_experiments(const std::vector<DgpSpec>& grid,
                                              const ExperimentConfig& config) {
  std::vector<ExperimentResult> out;
  out.reserve(grid.size());
  for (const DgpSpec& spec : grid) out.push_back(run_experiment(spec, config));
  return out;
}

void write_experiment_csv(std::ostream& out,
                          const std::vector<ExperimentResult>& results) {
  out << "N,T,estimator,coefficient,bias,std,rmse,count\n";
  char buf[64];
  for (const ExperimentResult& r : results) {
    for (const EstimatorSummary& s : r.estimators) {
      for (Eigen::Index k = 0; k < s.bias.size(); ++k) {
        out << r.spec.N << ',' << r.spec.T << ',' << s.name << ",beta"
            << (k + 1);
        for (const double v : {s.bias(k), s.std(k), s.rmse(k)}) {
          std::snprintf(buf, sizeof buf, ",%.17g", v);
          out << buf;
        }
        out << ',' << s.count << '\n';
      }
    }
  }
}

}  // namespace nnpanel
