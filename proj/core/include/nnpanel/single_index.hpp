#pragma once

#include <optional>

#include "nnpanel/estimators.hpp"

namespace nnpanel {

enum class LossKind { least_squares, weighted_ls, probit, quantile };

struct LossSpec {
  LossKind kind = LossKind::least_squares;
  /// N x T nonnegative weights S for weighted_ls.
  MatrixXd weights;
  /// Quantile level in (0,1).
  double tau = 0.5;
};

struct SingleIndexConfig {
  /// Initial proximal step; 0 derives it from the loss curvature bound.
  double step_size = 0.0;
  int max_iter = 20000;
  double tol_rel = 1e-12;
  /// Huber bandwidth for the quantile loss. Negative selects
  /// 1e-3 * std(Y); 0 runs the exact check function with diminishing
  /// subgradient steps.
  double quantile_smoothing = -1.0;
};

struct LossPoint {
  double value = 0.0;
  double derivative = 0.0;  // d value / dz
};

/// m(y, z) and its derivative in z for one cell.
///   least_squares  1/2 (y - z)^2
///   weighted_ls    1/2 S (y - z)^2
///   probit         -log Phi((2y - 1) z), y in {0,1}; linear beyond |z| = 8
///   quantile       rho_tau(y - z), Huberized on |y - z| <= smoothing
LossPoint loss_value_grad(const LossSpec& spec, double y, double z,
                          double weight = 1.0, double smoothing = 0.0);

/// Throws Error(invalid_input) for malformed specs or outcome values that
/// the loss does not accept.
void validate_loss(const LossSpec& spec, const PanelData& data);

/// argmin over (beta, Gamma) of
///   1/NT sum_it m(Y_it, X_it'beta + Gamma_it) + psi/sqrt(NT) |Gamma|_1
/// by monotone accelerated proximal gradient in the metric
/// blockdiag(x'x, I)/NT with backtracking. Throws Error(numerical_failure)
/// after 10 consecutive rejected (uphill) iterations.
EstimationResult fit_single_index(
    const PanelData& data, const LossSpec& spec, double psi,
    const SingleIndexConfig& config = {},
    const std::optional<VectorXd>& beta_start = std::nullopt);

}  // namespace nnpanel
