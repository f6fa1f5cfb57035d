#include "nnpanel/bias_correction.hpp"

#include <cmath>
#include <string>

#include "nnpanel/error.hpp"

namespace nnpanel {

BiasTerm compute_bias_term(const std::vector<MatrixXd>& X,
                           const FactorPair& factors) {
  const MatrixXd& lambda = factors.loadings;
  const MatrixXd& f = factors.factors;
  if (lambda.cols() != f.cols()) {
    fail(ErrorKind::dimension_mismatch, "loadings and factors differ in rank");
  }
  BiasTerm out{VectorXd::Zero(static_cast<Eigen::Index>(X.size()))};
  if (X.empty() || lambda.cols() == 0) return out;
  const MatrixXd a = inverse_sqrt_spd(lambda.transpose() * lambda);
  const MatrixXd c = inverse_sqrt_spd(f.transpose() * f);
  const MatrixXd left = a * lambda.transpose();  // R x N
  const MatrixXd right = f * c;                  // T x R
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (X[k].rows() != lambda.rows() || X[k].cols() != f.rows()) {
      fail(ErrorKind::dimension_mismatch, "regressor shape differs from factors");
    }
    const double scale =
        std::sqrt(static_cast<double>(X[k].rows()) * X[k].cols());
    out.b(k) = (left * X[k] * right).trace() / scale;
  }
  return out;
}

EstimationResult alt_bc_iterate(const PanelData& data, double psi, int R,
                                const VectorXd& beta0, int steps,
                                const SolverConfig& config) {
  data.validate();
  if (steps < 1) fail(ErrorKind::domain, "bias correction needs steps >= 1");
  if (!(psi > 0.0)) fail(ErrorKind::domain, "psi must be positive");
  if (beta0.size() != data.K()) {
    fail(ErrorKind::dimension_mismatch, "beta0 length differs from K");
  }
  EstimationResult res;
  VectorXd beta = beta0;
  res.beta_path.push_back(beta);
  res.objective_trace.push_back(penalized_profile(data, beta, psi).value);
  bool converged = true;
  EstimationResult fit;
  for (int s = 0; s < steps; ++s) {
    const FactorPair fp = pca_factors(combine(data, beta), R);
    const BiasTerm bias = compute_bias_term(data.X, fp);
    fit = fit_nn_penalized_tilted(data, psi, psi * bias.b, beta, config);
    converged = converged && fit.converged;
    for (const std::string& w : fit.warnings) {
      res.warnings.push_back("step " + std::to_string(s + 1) + ": " + w);
    }
    beta = fit.beta;
    res.beta_path.push_back(beta);
    res.objective_trace.push_back(penalized_profile(data, beta, psi).value);
    res.iterations += fit.iterations;
  }
  res.beta = beta;
  res.gamma = fit.gamma;
  res.gamma_rank = fit.gamma_rank;
  if (fit.gamma_rank != R) {
    res.warnings.push_back("rank of the penalized Gamma (" +
                           std::to_string(fit.gamma_rank) +
                           ") differs from R = " + std::to_string(R));
  }
  res.converged = converged;
  return res;
}

}  // namespace nnpanel
