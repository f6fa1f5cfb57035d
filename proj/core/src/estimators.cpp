#include "nnpanel/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <string>

#include "nnpanel/error.hpp"
#include "nnpanel/tuning.hpp"

namespace nnpanel {

namespace {

constexpr double kMaxCondition = 1e12;

double nt_of(const PanelData& data) {
  return static_cast<double>(data.N()) * static_cast<double>(data.T());
}

void require_regular_gram(const MatrixXd& gram, const std::string& what) {
  if (gram.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (!(hi > 0.0) || !(lo * kMaxCondition > hi)) {
    fail(ErrorKind::collinearity,
         what + " is singular or ill-conditioned (eigenvalues " +
             std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
}

void require_beta_size(const PanelData& data, const VectorXd& beta) {
  if (beta.size() != data.K()) {
    fail(ErrorKind::dimension_mismatch,
         "starting beta has " + std::to_string(beta.size()) +
             " entries, K = " + std::to_string(data.K()));
  }
}

void require_finite_vector(const VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    fail(ErrorKind::invalid_input, std::string(what) + " is not finite");
  }
}

// Q_psi(beta) + tilt'beta together with its gradient and the minimizing
// Gamma, from one residual SVD.
struct TiltedPoint {
  VectorXd beta;
  PenalizedEvaluation eval;
  double value = 0.0;
  VectorXd gradient;
};

TiltedPoint evaluate_tilted(const PanelData& data, const VectorXd& beta,
                            double psi, const VectorXd& tilt) {
  TiltedPoint p;
  p.beta = beta;
  p.eval = evaluate_penalized(data, beta, psi);
  p.value = p.eval.value + tilt.dot(beta);
  p.gradient = p.eval.gradient + tilt;
  return p;
}

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double relative_decrease(double before, double after) {
  const double denom = std::max(std::abs(before), 1e-300);
  return (before - after) / denom;
}

}  // namespace

EstimationResult pooled_ols(const PanelData& data) {
  data.validate();
  EstimationResult res;
  const MatrixXd gram = data.gram();
  require_regular_gram(gram, "x'x");
  res.beta = data.K() == 0 ? VectorXd(0)
                           : VectorXd(gram.ldlt().solve(data.cross(data.Y)));
  res.gamma = MatrixXd::Zero(data.N(), data.T());
  res.objective_trace.push_back(combine(data, res.beta).squaredNorm() /
                                (2.0 * nt_of(data)));
  res.beta_path.push_back(res.beta);
  res.iterations = 1;
  res.converged = true;
  return res;
}

EstimationResult fit_nn_penalized(const PanelData& data, double psi,
                                  const SolverConfig& config) {
  data.validate();
  const VectorXd start =
      data.K() == 0 ? VectorXd(0) : pooled_ols(data).beta;
  return fit_nn_penalized_tilted(data, psi, VectorXd::Zero(data.K()), start,
                                 config);
}

EstimationResult fit_nn_penalized(const PanelData& data, double psi,
                                  const VectorXd& beta_start,
                                  const SolverConfig& config) {
  return fit_nn_penalized_tilted(data, psi, VectorXd::Zero(data.K()),
                                 beta_start, config);
}

EstimationResult fit_nn_penalized_tilted(const PanelData& data, double psi,
                                         const VectorXd& tilt,
                                         const VectorXd& beta_start,
                                         const SolverConfig& config) {
  data.validate();
  if (!(psi > 0.0) || !std::isfinite(psi)) {
    fail(ErrorKind::domain, "psi must be a positive finite number");
  }
  if (!(config.tol_rel > 0.0) || config.max_iter < 1) {
    fail(ErrorKind::domain, "tol_rel must be positive and max_iter >= 1");
  }
  require_beta_size(data, beta_start);
  require_finite_vector(beta_start, "starting beta");
  if (tilt.size() != data.K()) {
    fail(ErrorKind::dimension_mismatch, "tilt length differs from K");
  }

  const double nt = nt_of(data);
  const Eigen::Index K = data.K();
  EstimationResult res;

  if (K == 0) {
    const PenalizedEvaluation ev = evaluate_penalized(data, beta_start, psi);
    res.beta = beta_start;
    res.gamma = ev.gamma;
    res.gamma_rank = ev.implied_rank;
    res.objective_trace.push_back(ev.value);
    res.beta_path.push_back(res.beta);
    res.iterations = 1;
    res.converged = true;
    return res;
  }

  const MatrixXd H = data.gram() / nt;
  require_regular_gram(H, "x'x");
  const Eigen::LDLT<MatrixXd> Hsolve(H);
  const double grad_threshold =
      config.grad_tol * (1.0 + data.cross(data.Y).norm() / nt);
  const int memory =
      static_cast<int>(std::min<Eigen::Index>(config.anderson_memory, K));

  TiltedPoint cur = evaluate_tilted(data, beta_start, psi, tilt);
  res.objective_trace.push_back(cur.value);
  res.beta_path.push_back(cur.beta);

  std::deque<VectorXd> hist_beta;
  std::deque<VectorXd> hist_step;
  int stalled = 0;
  int iter = 0;
  bool converged = false;

  while (iter < config.max_iter) {
    ++iter;
    // Exact block step: T(beta) - beta = -H^{-1} grad.
    const VectorXd step = -Hsolve.solve(cur.gradient);
    const double model_decrease = 0.5 * step.dot(H * step);
    // Objective differences below this are rounding.
    const double noise = 1e-14 * std::max(1.0, std::abs(cur.value));
    const double gnorm = cur.gradient.norm();

    hist_beta.push_back(cur.beta);
    hist_step.push_back(step);
    while (static_cast<int>(hist_beta.size()) > memory + 1) {
      hist_beta.pop_front();
      hist_step.pop_front();
    }

    TiltedPoint next;
    bool have_next = false;
    if (memory > 0 && hist_beta.size() >= 2) {
      const int m = static_cast<int>(hist_beta.size()) - 1;
      MatrixXd dB(K, m), dR(K, m);
      for (int j = 0; j < m; ++j) {
        dB.col(j) = hist_beta[j + 1] - hist_beta[j];
        dR.col(j) = hist_step[j + 1] - hist_step[j];
      }
      const VectorXd coef = dR.colPivHouseholderQr().solve(step);
      const VectorXd candidate = cur.beta + step - (dB + dR) * coef;
      if (candidate.allFinite()) {
        TiltedPoint trial = evaluate_tilted(data, candidate, psi, tilt);
        if (trial.value <= cur.value - model_decrease ||
            (trial.value <= cur.value + noise &&
             trial.gradient.norm() < gnorm)) {
          next = std::move(trial);
          have_next = true;
        }
      }
      if (!have_next) {
        hist_beta.erase(hist_beta.begin(), hist_beta.end() - 1);
        hist_step.erase(hist_step.begin(), hist_step.end() - 1);
      }
    }
    if (!have_next) {
      next = evaluate_tilted(data, VectorXd(cur.beta + step), psi, tilt);
    }

    if (next.value > cur.value + noise) {
      // The block step cannot increase the objective beyond rounding.
      converged = gnorm <= grad_threshold;
      res.warnings.push_back("block step increased the objective by " +
                             format_sci(next.value - cur.value));
      break;
    }
    const double rel = relative_decrease(cur.value, next.value);
    const bool improved_gradient = next.gradient.norm() < gnorm;
    cur = std::move(next);
    res.objective_trace.push_back(cur.value);
    res.beta_path.push_back(cur.beta);

    if (rel < config.tol_rel && cur.gradient.norm() <= grad_threshold) {
      converged = true;
      break;
    }
    stalled = (rel < config.tol_rel && !improved_gradient) ? stalled + 1 : 0;
    if (stalled >= 10) {
      // Rounding floor reached before the stationarity tolerance.
      converged = true;
      res.warnings.push_back(
          "stationarity tolerance not reached; stopped at gradient norm " +
          format_sci(cur.gradient.norm()));
      break;
    }
  }

  if (!converged && iter >= config.max_iter) {
    res.warnings.push_back("maximum iterations reached");
  }
  res.beta = cur.beta;
  res.gamma = cur.eval.gamma;
  res.gamma_rank = cur.eval.implied_rank;
  res.iterations = iter;
  res.converged = converged;
  return res;
}

EstimationResult fit_nn_min(const PanelData& data, const SolverConfig& config) {
  data.validate();
  if (data.K() < 1) fail(ErrorKind::domain, "nuclear-norm minimizer needs K >= 1");
  if (!(config.tol_rel > 0.0) || config.max_iter < 1) {
    fail(ErrorKind::domain, "tol_rel must be positive and max_iter >= 1");
  }
  const Eigen::Index K = data.K();
  EstimationResult res;

  VectorXd beta = pooled_ols(data).beta;
  NuclearEvaluation ev = evaluate_nuclear(data, beta);
  res.objective_trace.push_back(ev.value);
  res.beta_path.push_back(beta);
  int degenerate_hits = ev.degenerate ? 1 : 0;
  int iter = 0;
  const auto accept = [&](VectorXd b, NuclearEvaluation e) {
    beta = std::move(b);
    ev = std::move(e);
    degenerate_hits += ev.degenerate ? 1 : 0;
    res.objective_trace.push_back(ev.value);
    res.beta_path.push_back(beta);
  };

  double scale_x = 0.0;
  for (const MatrixXd& x : data.X) {
    scale_x = std::max(scale_x, x.norm() / data.sqrt_nt());
  }
  const double grad_threshold = config.grad_tol * (1.0 + scale_x);
  bool converged = ev.subgradient.norm() <= grad_threshold;

  // Normalized subgradient steps a/(1+k), each backtracked to a decrease.
  double a = config.initial_step > 0.0 ? config.initial_step
                                       : 0.1 * (1.0 + beta.norm());
  double last_step = a;
  for (int k = 0; k < config.subgradient_iter && !converged &&
                  iter < config.max_iter;
       ++k) {
    const double gnorm = ev.subgradient.norm();
    double t = a / (1.0 + k);
    bool accepted = false;
    for (int bt = 0; bt < 50 && !accepted; ++bt) {
      VectorXd candidate = beta - (t / gnorm) * ev.subgradient;
      NuclearEvaluation trial = evaluate_nuclear(data, candidate);
      if (trial.value < ev.value) {
        accept(std::move(candidate), std::move(trial));
        accepted = true;
      } else {
        t *= config.backtrack;
      }
    }
    ++iter;
    if (!accepted) break;
    if (k == 0) a = t;
    last_step = t;
    converged = ev.subgradient.norm() <= grad_threshold;
  }

  // Newton polish with a forward-difference Hessian of the gradient. Where
  // the objective is smooth this reaches the rounding floor in a few steps;
  // at kinks the Hessian is unusable and a scaled gradient step is used.
  for (int it = 0; it < config.polish_iter && !converged &&
                   iter < config.max_iter;
       ++it) {
    ++iter;
    const VectorXd& g = ev.subgradient;
    const double gnorm = g.norm();
    const double h = 1e-6 * (1.0 + beta.norm());
    MatrixXd hess(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
      VectorXd shifted = beta;
      shifted(k) += h;
      hess.col(k) = (nuclear_subgradient(data, shifted) - g) / h;
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
    VectorXd d;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(hess, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() > 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff())) {
      d = -hess.ldlt().solve(g);
    } else {
      d = -(last_step / gnorm) * g;
    }
    const double noise = 1e-14 * std::max(1.0, ev.value);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40 && !accepted; ++bt) {
      VectorXd candidate = beta + t * d;
      NuclearEvaluation trial = evaluate_nuclear(data, candidate);
      const bool sufficient = trial.value <= ev.value + 1e-4 * t * g.dot(d);
      const bool flat = trial.value <= ev.value + noise &&
                        trial.subgradient.norm() < gnorm;
      if (sufficient || flat) {
        last_step = (t * d).norm();
        accept(std::move(candidate), std::move(trial));
        accepted = true;
      } else {
        t *= 0.5;
      }
    }
    if (!accepted) {
      // No further decrease is resolvable in floating point.
      converged = relative_decrease(res.objective_trace.front(), ev.value) >= 0.0;
      break;
    }
    converged = ev.subgradient.norm() <= grad_threshold;
  }

  // Golden-section polish around the incumbent for a scalar coefficient.
  if (K == 1) {
    const auto f = [&](double b) {
      return nuclear_objective(data, VectorXd::Constant(1, b));
    };
    const double center = beta(0);
    const double fc = ev.value;
    double w = std::max(4.0 * last_step, 1e-7 * (1.0 + std::abs(center)));
    w = std::min(w, 1.0 + std::abs(center));
    int expand = 0;
    while ((f(center - w) < fc || f(center + w) < fc) && expand < 60) {
      w *= 2.0;
      ++expand;
    }
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = center - w, hi = center + w;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    const double tol = 1e-11 * (1.0 + std::abs(center));
    while (hi - lo > tol) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = f(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = f(x2);
      }
    }
    VectorXd golden = VectorXd::Constant(1, 0.5 * (lo + hi));
    NuclearEvaluation gev = evaluate_nuclear(data, golden);
    if (gev.value < ev.value) accept(std::move(golden), std::move(gev));
    converged = true;
  }

  if (degenerate_hits > 0) {
    res.warnings.push_back(
        "residual had numerically zero singular values at " +
        std::to_string(degenerate_hits) +
        " iterates; subgradient taken over the nonzero block");
  }
  if (!converged) res.warnings.push_back("polish did not reach stationarity");
  res.beta = beta;
  res.iterations = iter;
  res.converged = converged;
  return res;
}

EstimationResult fit_ls_local(const PanelData& data, int R,
                              const VectorXd& beta_start,
                              const SolverConfig& config) {
  data.validate();
  const Eigen::Index q = std::min(data.N(), data.T());
  if (R < 0 || R > q) {
    fail(ErrorKind::domain, "R = " + std::to_string(R) +
                                " outside [0, min(N,T) = " +
                                std::to_string(q) + "]");
  }
  require_beta_size(data, beta_start);
  require_finite_vector(beta_start, "starting beta");
  if (R == 0) return pooled_ols(data);

  const double nt = nt_of(data);
  EstimationResult res;
  VectorXd beta = beta_start;
  res.beta_path.push_back(beta);
  bool converged = false;
  int iter = 0;
  Spectrum sp = svd(combine(data, beta));
  while (iter < config.max_iter) {
    ++iter;
    res.objective_trace.push_back(profile_ls_from_spectrum(sp.values, R, nt));
    VectorXd next;
    try {
      next = beta_step(data, pca_factors(sp, R));
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " at iterate " +
                         std::to_string(iter - 1));
    }
    const double change = (next - beta).norm();
    beta = next;
    res.beta_path.push_back(beta);
    sp = svd(combine(data, beta));
    if (change < config.tol_rel * (1.0 + beta.norm())) {
      converged = true;
      break;
    }
  }
  res.objective_trace.push_back(profile_ls_from_spectrum(sp.values, R, nt));
  if (!converged) res.warnings.push_back("maximum iterations reached");
  res.beta = beta;
  res.gamma = truncate(sp, R);
  res.gamma_rank = std::min(R, numerical_rank(sp.values, data.N(), data.T()));
  res.iterations = iter;
  res.converged = converged;
  return res;
}

}  // namespace nnpanel
