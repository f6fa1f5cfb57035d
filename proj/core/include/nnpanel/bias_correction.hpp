#pragma once

#include "nnpanel/tuning.hpp"

namespace nnpanel {

/// b_k = Tr[(l'l)^{-1/2} l' X_k f (f'f)^{-1/2}] / sqrt(NT), the leading
/// regularization bias direction of the penalized estimator.
struct BiasTerm {
  VectorXd b;
};

/// Throws Error(rank_deficient) when l'l or f'f is singular. An empty factor
/// pair gives b = 0.
BiasTerm compute_bias_term(const std::vector<MatrixXd>& X,
                           const FactorPair& factors);

/// beta^(s+1) = argmin Q_psi(beta) + psi (beta - beta^(s))'b^(s), where b^(s)
/// uses R principal components of Y - beta^(s).X. beta_path holds
/// beta0 and every iterate; objective_trace holds Q_psi at each iterate.
EstimationResult alt_bc_iterate(const PanelData& data, double psi, int R,
                                const VectorXd& beta0, int steps,
                                const SolverConfig& config = {});

}  // namespace nnpanel
