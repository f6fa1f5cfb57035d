#pragma once

#include <string>
#include <vector>

#include "nnpanel/objective.hpp"

namespace nnpanel {

struct SolverConfig {
  /// Relative objective decrease below which an iteration counts as stalled.
  double tol_rel = 1e-10;
  int max_iter = 10000;
  /// Stationarity tolerance on the beta gradient, relative to the data scale.
  double grad_tol = 1e-10;
  /// Anderson acceleration memory for the block-coordinate solver; 0 turns
  /// acceleration off.
  int anderson_memory = 5;
  /// Subgradient phase of the nuclear-norm minimizer.
  int subgradient_iter = 30;
  /// Initial subgradient step a; 0 picks one from the data scale.
  double initial_step = 0.0;
  double backtrack = 0.5;
  int polish_iter = 50;
};

struct EstimationResult {
  VectorXd beta;
  /// Fitted low-rank component; empty when the estimator does not report one.
  MatrixXd gamma;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  int gamma_rank = 0;
  std::vector<VectorXd> beta_path;
  std::vector<std::string> warnings;
};

/// beta = (x'x)^{-1} x'y. Throws Error(collinearity) when the condition
/// number of x'x reaches 1e12.
EstimationResult pooled_ols(const PanelData& data);

/// Joint minimizer of 1/(2NT)|Y - beta.X - Gamma|_2^2 + psi/sqrt(NT) |Gamma|_1
/// by exact block-coordinate descent with safeguarded Anderson acceleration.
/// The trace records Q_psi at accepted iterates and never increases.
EstimationResult fit_nn_penalized(const PanelData& data, double psi,
                                  const SolverConfig& config = {});
EstimationResult fit_nn_penalized(const PanelData& data, double psi,
                                  const VectorXd& beta_start,
                                  const SolverConfig& config);

/// Minimizer of Q_psi(beta) + tilt'beta over beta. tilt = 0 is
/// fit_nn_penalized.
EstimationResult fit_nn_penalized_tilted(const PanelData& data, double psi,
                                         const VectorXd& tilt,
                                         const VectorXd& beta_start,
                                         const SolverConfig& config = {});

/// argmin_beta |Y - beta.X|_1 / sqrt(NT): normalized subgradient descent with
/// step a/(1+k) and backtracking, then a Newton polish with a
/// finite-difference Hessian, plus golden section for K = 1. gamma is left
/// empty.
EstimationResult fit_nn_min(const PanelData& data,
                            const SolverConfig& config = {});

/// Local minimizer of L_R near beta_start, by iterating principal components
/// and the projected least squares update until |delta beta| <
/// tol_rel (1 + |beta|).
EstimationResult fit_ls_local(const PanelData& data, int R,
                              const VectorXd& beta_start,
                              const SolverConfig& config = {});

}  // namespace nnpanel
