#pragma once

// Profile objectives of beta, each evaluated exactly from the singular
// values of the residual Y - beta . X:
//
//   L_R(beta)    = 1/(2NT) sum_{r>R} s_r^2            (rank-R least squares)
//   Q_psi(beta)  = sum_r q_psi(s_r / sqrt(NT))        (nuclear-norm penalized)
//   ||Y - beta . X||_1 / sqrt(NT)                     (nuclear-norm minimizing)

#include "nnpanel/panel.hpp"

namespace nnpanel {

struct ObjectiveValue {
  double value = 0.0;
  /// Singular values of the residual divided by sqrt(NT).
  VectorXd residual_spectrum;
  /// Q_psi: #{r : s_r > sqrt(NT) psi}, the rank of the penalized Gamma.
  /// L_R: min(R, rank of the residual).
  int implied_rank = 0;
};

/// Y - sum_k beta_k X_k.
MatrixXd combine(const PanelData& data, const VectorXd& beta);

ObjectiveValue profile_ls(const PanelData& data, const VectorXd& beta, int R);
ObjectiveValue penalized_profile(const PanelData& data, const VectorXd& beta,
                                 double psi);
double nuclear_objective(const PanelData& data, const VectorXd& beta);
VectorXd nuclear_subgradient(const PanelData& data, const VectorXd& beta);

/// Evaluations that reuse one residual SVD for both value and derivative.
struct NuclearEvaluation {
  double value = 0.0;
  VectorXd subgradient;
  /// True when the residual has numerically zero singular values, so the
  /// subgradient is built from the nonzero block only.
  bool degenerate = false;
};
NuclearEvaluation evaluate_nuclear(const PanelData& data, const VectorXd& beta);

struct PenalizedEvaluation {
  double value = 0.0;
  /// Gradient of Q_psi, equal to -x'(y - x beta - gamma_psi(beta)) / NT.
  VectorXd gradient;
  int implied_rank = 0;
  /// Minimizing Gamma for this beta, soft_threshold(residual, sqrt(NT) psi).
  MatrixXd gamma;
};
PenalizedEvaluation evaluate_penalized(const PanelData& data,
                                       const VectorXd& beta, double psi);

/// Same two objectives evaluated from precomputed singular values of the
/// unscaled residual; used by landscape scans.
double profile_ls_from_spectrum(const VectorXd& residual_values, int R,
                                double nt);
double penalized_from_spectrum(const VectorXd& residual_values, double psi,
                               double nt);

}  // namespace nnpanel
