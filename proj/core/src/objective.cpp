#include "nnpanel/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnpanel/error.hpp"

namespace nnpanel {

namespace {

double nt_of(const PanelData& data) {
  return static_cast<double>(data.N()) * static_cast<double>(data.T());
}

void require_positive_psi(double psi) {
  if (!(psi > 0.0) || !std::isfinite(psi)) {
    fail(ErrorKind::domain, "psi must be a positive finite number");
  }
}

}  // namespace

MatrixXd combine(const PanelData& data, const VectorXd& beta) {
  if (beta.size() != data.K()) {
    fail(ErrorKind::dimension_mismatch,
         "beta has " + std::to_string(beta.size()) + " entries, K = " +
             std::to_string(data.K()));
  }
  MatrixXd r = data.Y;
  for (Eigen::Index k = 0; k < data.K(); ++k) {
    if (data.X[k].rows() != data.N() || data.X[k].cols() != data.T()) {
      fail(ErrorKind::dimension_mismatch, "regressor shape differs from Y");
    }
    r -= beta(k) * data.X[k];
  }
  return r;
}

double profile_ls_from_spectrum(const VectorXd& s, int R, double nt) {
  double tail = 0.0;
  for (Eigen::Index r = std::max(R, 0); r < s.size(); ++r) tail += s(r) * s(r);
  return tail / (2.0 * nt);
}

double penalized_from_spectrum(const VectorXd& s, double psi, double nt) {
  const double scale = std::sqrt(nt);
  double total = 0.0;
  for (Eigen::Index r = 0; r < s.size(); ++r) {
    total += penalty_scalar(s(r) / scale, psi, PenaltyKind::q);
  }
  return total;
}

ObjectiveValue profile_ls(const PanelData& data, const VectorXd& beta, int R) {
  const Eigen::Index q = std::min(data.N(), data.T());
  if (R < 0 || R > q) {
    fail(ErrorKind::domain, "R = " + std::to_string(R) +
                                " outside [0, min(N,T) = " + std::to_string(q) +
                                "]");
  }
  const VectorXd s = singular_values(combine(data, beta));
  ObjectiveValue out;
  out.value = profile_ls_from_spectrum(s, R, nt_of(data));
  out.residual_spectrum = s / data.sqrt_nt();
  out.implied_rank = std::min(R, numerical_rank(s, data.N(), data.T()));
  return out;
}

ObjectiveValue penalized_profile(const PanelData& data, const VectorXd& beta,
                                 double psi) {
  require_positive_psi(psi);
  const VectorXd s = singular_values(combine(data, beta));
  ObjectiveValue out;
  out.residual_spectrum = s / data.sqrt_nt();
  out.value = penalty_spectrum(out.residual_spectrum, psi, PenaltyKind::q);
  const double threshold = data.sqrt_nt() * psi;
  out.implied_rank =
      static_cast<int>((s.array() > threshold).count());
  return out;
}

double nuclear_objective(const PanelData& data, const VectorXd& beta) {
  return singular_values(combine(data, beta)).sum() / data.sqrt_nt();
}

NuclearEvaluation evaluate_nuclear(const PanelData& data, const VectorXd& beta) {
  const Spectrum sp = svd(combine(data, beta));
  NuclearEvaluation out;
  out.value = sp.values.sum() / data.sqrt_nt();
  out.subgradient = VectorXd::Zero(data.K());
  const int rank = numerical_rank(sp.values, data.N(), data.T());
  out.degenerate = rank < sp.values.size();
  if (rank == 0) return out;
  // U V' over the numerically nonzero block.
  const MatrixXd uv =
      sp.left.leftCols(rank) * sp.right.leftCols(rank).transpose();
  for (Eigen::Index k = 0; k < data.K(); ++k) {
    out.subgradient(k) = -data.X[k].cwiseProduct(uv).sum() / data.sqrt_nt();
  }
  return out;
}

VectorXd nuclear_subgradient(const PanelData& data, const VectorXd& beta) {
  return evaluate_nuclear(data, beta).subgradient;
}

PenalizedEvaluation evaluate_penalized(const PanelData& data,
                                       const VectorXd& beta, double psi) {
  require_positive_psi(psi);
  const Spectrum sp = svd(combine(data, beta));
  const double scale = data.sqrt_nt();
  const double threshold = scale * psi;
  PenalizedEvaluation out;
  out.value = penalty_spectrum(sp.values / scale, psi, PenaltyKind::q);
  out.implied_rank = static_cast<int>((sp.values.array() > threshold).count());
  out.gamma = soft_threshold(sp, threshold);
  // residual - gamma = U diag(min(s, threshold)) V'.
  const VectorXd capped = sp.values.cwiseMin(threshold);
  const MatrixXd kept = sp.left * capped.asDiagonal() * sp.right.transpose();
  out.gradient = -data.cross(kept) / (scale * scale);
  return out;
}

}  // namespace nnpanel
