#include "nnpanel/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnpanel/error.hpp"

namespace nnpanel {

namespace {

void require_rank_in_range(int R, Eigen::Index q) {
  if (R < 0 || R > q) {
    fail(ErrorKind::domain, "R = " + std::to_string(R) +
                                " outside [0, min(N,T) = " +
                                std::to_string(q) + "]");
  }
}

}  // namespace

FactorPair pca_factors(const Spectrum& sp, int R) {
  require_rank_in_range(R, sp.size());
  const Eigen::Index T = sp.right.rows();
  const double sqrt_t = std::sqrt(static_cast<double>(T));
  FactorPair fp;
  fp.factors = sqrt_t * sp.right.leftCols(R);
  fp.loadings =
      sp.left.leftCols(R) * (sp.values.head(R) / sqrt_t).asDiagonal();
  return fp;
}

FactorPair pca_factors(const MatrixRef& residual, int R) {
  require_rank_in_range(R, std::min(residual.rows(), residual.cols()));
  if (R == 0) {
    require_finite(residual, "residual");
    return {MatrixXd(residual.rows(), 0), MatrixXd(residual.cols(), 0)};
  }
  return pca_factors(svd(residual), R);
}

VectorXd beta_step(const PanelData& data, const FactorPair& factors) {
  const Eigen::Index K = data.K();
  if (factors.loadings.rows() != data.N() ||
      factors.factors.rows() != data.T() ||
      factors.loadings.cols() != factors.factors.cols()) {
    fail(ErrorKind::dimension_mismatch, "factor pair does not match panel");
  }
  if (K == 0) return VectorXd(0);
  const double nt = static_cast<double>(data.N()) * data.T();
  const MatrixXd ql = column_basis(factors.loadings);
  const MatrixXd qf = column_basis(factors.factors);
  // M_lambda Z M_f = Z - Ql(Ql'Z), then right-multiplied by M_f.
  const auto project = [&](const MatrixXd& Z) {
    MatrixXd left = annihilate(ql, Z);
    return MatrixXd(left - (left * qf) * qf.transpose());
  };
  std::vector<MatrixXd> projected;
  projected.reserve(K);
  for (const MatrixXd& x : data.X) projected.push_back(project(x));
  MatrixXd W(K, K);
  VectorXd rhs(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = 0; l <= k; ++l) {
      W(k, l) = W(l, k) = projected[k].cwiseProduct(projected[l]).sum() / nt;
    }
    rhs(k) = projected[k].cwiseProduct(data.Y).sum() / nt;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double scale = data.gram().diagonal().maxCoeff() / nt;
  if (!(scale > 0.0) || !(lo > 1e-12 * scale)) {
    fail(ErrorKind::collinearity,
         "regressors are collinear after projecting out the factors");
  }
  return W.ldlt().solve(rhs);
}

EstimationResult post_iterate(const PanelData& data, int R,
                              const VectorXd& beta0, int steps) {
  data.validate();
  if (steps < 1) fail(ErrorKind::domain, "post-iteration needs steps >= 1");
  require_rank_in_range(R, std::min(data.N(), data.T()));
  if (beta0.size() != data.K()) {
    fail(ErrorKind::dimension_mismatch, "beta0 length differs from K");
  }
  const double nt = static_cast<double>(data.N()) * data.T();
  EstimationResult res;
  VectorXd beta = beta0;
  res.beta_path.push_back(beta);
  Spectrum sp = svd(combine(data, beta));
  for (int s = 0; s < steps; ++s) {
    res.objective_trace.push_back(profile_ls_from_spectrum(sp.values, R, nt));
    try {
      beta = beta_step(data, pca_factors(sp, R));
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " at step " +
                         std::to_string(s + 1));
    }
    res.beta_path.push_back(beta);
    sp = svd(combine(data, beta));
  }
  res.objective_trace.push_back(profile_ls_from_spectrum(sp.values, R, nt));
  res.beta = beta;
  res.gamma = truncate(sp, R);
  res.gamma_rank = std::min(R, numerical_rank(sp.values, data.N(), data.T()));
  res.iterations = steps;
  res.converged = true;
  return res;
}

TuningReport select_psi(const PanelData& data, int r_max,
                        const SolverConfig& config, double rank_factor) {
  data.validate();
  if (r_max < 0) fail(ErrorKind::domain, "r_max must be >= 0");
  TuningReport rep;
  rep.r_max = r_max;
  rep.rank_factor = rank_factor;
  if (data.K() > 0) {
    EstimationResult star = fit_nn_min(data, config);
    rep.beta_star = star.beta;
    rep.warnings = star.warnings;
  } else {
    rep.beta_star = VectorXd(0);
  }
  rep.residual_spectrum = svd(combine(data, rep.beta_star));
  const Spectrum& sp = rep.residual_spectrum;
  const Eigen::Index q = sp.size();
  const Eigen::Index keep = std::min<Eigen::Index>(r_max, q);
  rep.cleaned_spectrum.values = sp.values.tail(q - keep);
  rep.cleaned_spectrum.left = sp.left.rightCols(q - keep);
  rep.cleaned_spectrum.right = sp.right.rightCols(q - keep);
  const double tol = rank_tolerance(sp.values, data.N(), data.T());
  if (keep < q && sp.values(keep) > tol) {
    rep.psi_hat = 2.0 * sp.values(keep) / data.sqrt_nt();
  } else {
    rep.psi_hat = 0.0;
  }
  if (r_max >= q) {
    rep.warnings.push_back("r_max >= min(N,T); psi_hat set to 0");
  }
  rep.r_hat = estimate_rank(data, rep, rank_factor);
  return rep;
}

int estimate_rank(const PanelData& data, const TuningReport& report,
                  double factor) {
  const Spectrum& sp = report.residual_spectrum;
  if (sp.left.rows() != data.N() || sp.right.rows() != data.T()) {
    fail(ErrorKind::dimension_mismatch,
         "tuning report was produced from a panel of different shape");
  }
  if (!(factor > 0.0)) fail(ErrorKind::domain, "rank factor must be positive");
  const double threshold = factor * data.sqrt_nt() * report.psi_hat;
  const double tol = rank_tolerance(sp.values, data.N(), data.T());
  int count = 0;
  for (Eigen::Index r = 0; r < sp.size(); ++r) {
    if (sp.values(r) >= threshold && sp.values(r) > tol) ++count;
  }
  return count;
}

}  // namespace nnpanel
