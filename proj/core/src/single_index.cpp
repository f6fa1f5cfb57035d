#include "nnpanel/single_index.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nnpanel/error.hpp"

namespace nnpanel {

namespace {

constexpr double kProbitBound = 8.0;

// -log Phi(x) and its derivative, stable in both tails.
LossPoint neg_log_cdf(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return {-std::log(cdf), -pdf / cdf};
}

double default_smoothing(const PanelData& data) {
  const double mean = data.Y.mean();
  const double var = (data.Y.array() - mean).square().sum() /
                     std::max<double>(1.0, static_cast<double>(data.Y.size()) - 1.0);
  const double sd = std::sqrt(var);
  return 1e-3 * (sd > 0.0 ? sd : 1.0);
}

struct Iterate {
  VectorXd beta;
  MatrixXd gamma;
  double nuclear = 0.0;  // |gamma|_1
  double smooth = 0.0;   // 1/NT sum m
  double total = 0.0;
};

}  // namespace

LossPoint loss_value_grad(const LossSpec& spec, double y, double z,
                          double weight, double smoothing) {
  switch (spec.kind) {
    case LossKind::least_squares: {
      const double u = y - z;
      return {0.5 * u * u, -u};
    }
    case LossKind::weighted_ls: {
      if (!(weight >= 0.0)) fail(ErrorKind::invalid_input, "negative weight");
      const double u = y - z;
      return {0.5 * weight * u * u, -weight * u};
    }
    case LossKind::probit: {
      if (y != 0.0 && y != 1.0) {
        fail(ErrorKind::invalid_input, "probit outcome must be 0 or 1");
      }
      const double q = 2.0 * y - 1.0;
      const double c = std::clamp(z, -kProbitBound, kProbitBound);
      const LossPoint at = neg_log_cdf(q * c);
      const double slope = q * at.derivative;
      return {at.value + slope * (z - c), slope};
    }
    case LossKind::quantile: {
      const double tau = spec.tau;
      if (!(tau > 0.0 && tau < 1.0)) {
        fail(ErrorKind::invalid_input, "quantile level must lie in (0,1)");
      }
      if (smoothing < 0.0) fail(ErrorKind::invalid_input, "negative smoothing");
      const double u = y - z;
      if (smoothing > 0.0 && std::abs(u) <= smoothing) {
        const double w = u + smoothing;
        return {(tau - 1.0) * u + w * w / (4.0 * smoothing),
                -((tau - 1.0) + w / (2.0 * smoothing))};
      }
      const double slope = u < 0.0 ? tau - 1.0 : tau;
      return {u * slope, -slope};
    }
  }
  fail(ErrorKind::invalid_input, "unknown loss kind");
}

void validate_loss(const LossSpec& spec, const PanelData& data) {
  if (spec.kind == LossKind::weighted_ls) {
    if (spec.weights.rows() != data.N() || spec.weights.cols() != data.T()) {
      fail(ErrorKind::dimension_mismatch, "weights must be N x T");
    }
    if (!spec.weights.allFinite() || (spec.weights.array() < 0.0).any()) {
      fail(ErrorKind::invalid_input, "weights must be finite and nonnegative");
    }
  }
  if (spec.kind == LossKind::quantile && !(spec.tau > 0.0 && spec.tau < 1.0)) {
    fail(ErrorKind::invalid_input, "quantile level must lie in (0,1)");
  }
  if (spec.kind == LossKind::probit &&
      !((data.Y.array() == 0.0) || (data.Y.array() == 1.0)).all()) {
    fail(ErrorKind::invalid_input, "probit outcome must be 0 or 1");
  }
}

EstimationResult fit_single_index(const PanelData& data, const LossSpec& spec,
                                  double psi, const SingleIndexConfig& config,
                                  const std::optional<VectorXd>& beta_start) {
  data.validate();
  validate_loss(spec, data);
  if (!(psi > 0.0) || !std::isfinite(psi)) {
    fail(ErrorKind::domain, "psi must be a positive finite number");
  }
  if (config.max_iter < 1 || !(config.tol_rel > 0.0) ||
      config.step_size < 0.0) {
    fail(ErrorKind::domain, "invalid single-index solver configuration");
  }
  const Eigen::Index N = data.N(), T = data.T(), K = data.K();
  const double nt = static_cast<double>(N) * static_cast<double>(T);
  const double sqrt_nt = std::sqrt(nt);
  const double smoothing = spec.kind != LossKind::quantile ? 0.0
                           : config.quantile_smoothing < 0.0
                               ? default_smoothing(data)
                               : config.quantile_smoothing;
  const bool exact_kink = spec.kind == LossKind::quantile && smoothing == 0.0;

  const MatrixXd gram = data.gram();
  Eigen::LDLT<MatrixXd> gram_solve;
  if (K > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() * 1e12 > es.eigenvalues().maxCoeff())) {
      fail(ErrorKind::collinearity, "x'x is singular or ill-conditioned");
    }
    gram_solve.compute(gram);
  }

  double curvature = 1.0;
  if (spec.kind == LossKind::weighted_ls) {
    curvature = std::max(spec.weights.maxCoeff(), 1e-300);
  } else if (spec.kind == LossKind::quantile && smoothing > 0.0) {
    curvature = 1.0 / (2.0 * smoothing);
  }
  double step = config.step_size > 0.0 ? config.step_size : 1.0 / curvature;

  const auto weight_at = [&](Eigen::Index i, Eigen::Index t) {
    return spec.kind == LossKind::weighted_ls ? spec.weights(i, t) : 1.0;
  };
  // Smooth part and its z-derivative scaled by NT (i.e. m'(z) cellwise).
  const auto smooth_part = [&](const VectorXd& beta, const MatrixXd& gamma,
                               MatrixXd* deriv) {
    MatrixXd z = linear_index(data, beta) + gamma;
    double total = 0.0;
    if (deriv) deriv->resize(N, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index i = 0; i < N; ++i) {
        const LossPoint lp = loss_value_grad(spec, data.Y(i, t), z(i, t),
                                             weight_at(i, t), smoothing);
        total += lp.value;
        if (deriv) (*deriv)(i, t) = lp.derivative;
      }
    }
    return total / nt;
  };
  const auto metric_sq = [&](const VectorXd& db, const MatrixXd& dg) {
    const double bpart = K > 0 ? db.dot(gram * db) : 0.0;
    return (bpart + dg.squaredNorm()) / nt;
  };
  // Proximal step from (beta, gamma) with gradient m'(z) and step t.
  const auto prox = [&](const VectorXd& beta, const MatrixXd& gamma,
                        const MatrixXd& deriv, double t) {
    Iterate out;
    out.beta = K > 0 ? VectorXd(beta - t * gram_solve.solve(data.cross(deriv)))
                     : beta;
    const Spectrum sp = svd(gamma - t * deriv);
    const double level = t * psi * sqrt_nt;
    const VectorXd shrunk = (sp.values.array() - level).max(0.0).matrix();
    out.gamma = sp.left * shrunk.asDiagonal() * sp.right.transpose();
    out.nuclear = shrunk.sum();
    return out;
  };

  EstimationResult res;
  Iterate cur;
  if (beta_start) {
    if (beta_start->size() != K) {
      fail(ErrorKind::dimension_mismatch, "beta_start length differs from K");
    }
    cur.beta = *beta_start;
  } else if (K > 0 && (spec.kind == LossKind::least_squares ||
                       spec.kind == LossKind::weighted_ls)) {
    cur.beta = gram_solve.solve(data.cross(data.Y));
  } else {
    cur.beta = VectorXd::Zero(K);
  }
  cur.gamma = MatrixXd::Zero(N, T);
  cur.smooth = smooth_part(cur.beta, cur.gamma, nullptr);
  cur.total = cur.smooth;
  res.objective_trace.push_back(cur.total);
  res.beta_path.push_back(cur.beta);

  Iterate best = cur;
  Iterate y = cur;
  double theta = 1.0;
  int uphill = 0;
  int quiet = 0;
  int iter = 0;
  bool converged = false;
  MatrixXd deriv;

  while (iter < config.max_iter) {
    ++iter;
    const double fy = smooth_part(y.beta, y.gamma, &deriv);
    Iterate p;
    if (exact_kink) {
      // Diminishing steps for the nonsmooth check function; y == cur here.
      p = prox(y.beta, y.gamma, deriv,
               step / std::sqrt(static_cast<double>(iter)));
      p.smooth = smooth_part(p.beta, p.gamma, nullptr);
      p.total = p.smooth + psi / sqrt_nt * p.nuclear;
      if (p.total < best.total) best = p;
      cur = p;
      y = p;
      res.objective_trace.push_back(best.total);
      res.beta_path.push_back(best.beta);
      continue;
    }
    const VectorXd gb = K > 0 ? VectorXd(data.cross(deriv) / nt) : VectorXd(0);
    for (int bt = 0; bt < 60; ++bt) {
      p = prox(y.beta, y.gamma, deriv, step);
      p.smooth = smooth_part(p.beta, p.gamma, nullptr);
      const VectorXd db = p.beta - y.beta;
      const MatrixXd dg = p.gamma - y.gamma;
      const double model = fy + (K > 0 ? gb.dot(db) : 0.0) +
                           deriv.cwiseProduct(dg).sum() / nt +
                           metric_sq(db, dg) / (2.0 * step);
      if (p.smooth <= model + 1e-15 * std::abs(model)) break;
      step *= 0.5;
    }
    p.total = p.smooth + psi / sqrt_nt * p.nuclear;

    const Iterate prev = cur;
    if (p.total <= cur.total) {
      cur = p;
      uphill = 0;
    } else if (++uphill >= 10) {
      fail(ErrorKind::numerical_failure,
           "proximal gradient diverged: objective rose on 10 consecutive "
           "iterations after " + std::to_string(res.objective_trace.size()) +
           " accepted steps (last value " +
           std::to_string(res.objective_trace.back()) + ")");
    }

    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    y.beta = cur.beta + (theta / theta_next) * (p.beta - cur.beta) +
             ((theta - 1.0) / theta_next) * (cur.beta - prev.beta);
    y.gamma = cur.gamma + (theta / theta_next) * (p.gamma - cur.gamma) +
              ((theta - 1.0) / theta_next) * (cur.gamma - prev.gamma);
    theta = theta_next;

    res.objective_trace.push_back(cur.total);
    res.beta_path.push_back(cur.beta);
    const double rel =
        (prev.total - cur.total) / std::max(std::abs(prev.total), 1e-300);
    const double moved = std::sqrt(metric_sq(cur.beta - prev.beta,
                                             cur.gamma - prev.gamma));
    const double scale = 1.0 + std::sqrt(metric_sq(cur.beta, cur.gamma));
    if (rel < config.tol_rel && moved < 1e-9 * scale) {
      if (++quiet >= 3) {
        converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
    // Restart momentum when the accelerated point stops helping.
    if (p.total > prev.total) {
      theta = 1.0;
      y = cur;
    }
  }

  const Iterate& out = exact_kink ? best : cur;
  if (!converged && !exact_kink) res.warnings.push_back("maximum iterations reached");
  if (exact_kink) {
    res.warnings.push_back("exact check function: best subgradient iterate reported");
  }
  res.beta = out.beta;
  res.gamma = out.gamma;
  res.gamma_rank = numerical_rank(out.gamma);
  res.iterations = iter;
  res.converged = converged;
  return res;
}

}  // namespace nnpanel
