#pragma once

#include "nnpanel/estimators.hpp"

namespace nnpanel {

/// Gamma = loadings * factors', normalized so that factors'factors / T = I
/// and loadings'loadings is diagonal with nonincreasing entries.
struct FactorPair {
  MatrixXd loadings;  // N x R
  MatrixXd factors;   // T x R

  Eigen::Index rank() const { return loadings.cols(); }
  MatrixXd product() const { return loadings * factors.transpose(); }
};

struct TuningReport {
  double psi_hat = 0.0;
  int r_hat = 0;
  int r_max = 8;
  double rank_factor = 2.0;
  VectorXd beta_star;
  /// Spectrum of E_* = Y - beta_star . X.
  Spectrum residual_spectrum;
  /// Spectrum of E_* with its leading r_max components removed.
  Spectrum cleaned_spectrum;
  std::vector<std::string> warnings;
};

/// Leading R principal components of a residual matrix.
FactorPair pca_factors(const MatrixRef& residual, int R);
/// Same, from an already computed SVD of the residual.
FactorPair pca_factors(const Spectrum& spectrum, int R);

/// beta = (x'(M_f x M_lambda)x)^{-1} x'(M_f x M_lambda)y, evaluated through
/// M_lambda Z M_f. Throws Error(collinearity) when the projected design is
/// singular.
VectorXd beta_step(const PanelData& data, const FactorPair& factors);

/// `steps` rounds of pca_factors on Y - beta.X followed by beta_step. The
/// result holds the whole trajectory in beta_path (beta0 first) and L_R at
/// each iterate in objective_trace.
EstimationResult post_iterate(const PanelData& data, int R,
                              const VectorXd& beta0, int steps = 3);

/// psi_hat = 2 s_{r_max+1}(E_*) / sqrt(NT) with E_* the residual of the
/// nuclear-norm minimizer, plus r_hat from estimate_rank.
TuningReport select_psi(const PanelData& data, int r_max = 8,
                        const SolverConfig& config = {},
                        double rank_factor = 2.0);

/// #{r : s_r(E_*) >= factor sqrt(NT) psi_hat}, counting only numerically
/// nonzero singular values.
int estimate_rank(const PanelData& data, const TuningReport& report,
                  double factor = 2.0);

}  // namespace nnpanel
