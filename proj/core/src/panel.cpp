#include "nnpanel/panel.hpp"

#include <cmath>
#include <string>

#include "nnpanel/error.hpp"

namespace nnpanel {

double PanelData::sqrt_nt() const {
  return std::sqrt(static_cast<double>(N()) * static_cast<double>(T()));
}

void PanelData::validate() const {
  if (N() < 1 || T() < 1) {
    fail(ErrorKind::invalid_input, "panel must have N >= 1 and T >= 1");
  }
  require_finite(Y, "Y");
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (X[k].rows() != N() || X[k].cols() != T()) {
      fail(ErrorKind::dimension_mismatch,
           "regressor x" + std::to_string(k + 1) + " is " +
               std::to_string(X[k].rows()) + "x" + std::to_string(X[k].cols()) +
               ", expected " + std::to_string(N()) + "x" +
               std::to_string(T()));
    }
    require_finite(X[k], "regressor");
  }
  if (!unit_ids.empty() && static_cast<Eigen::Index>(unit_ids.size()) != N()) {
    fail(ErrorKind::dimension_mismatch, "unit label count differs from N");
  }
  if (!time_ids.empty() && static_cast<Eigen::Index>(time_ids.size()) != T()) {
    fail(ErrorKind::dimension_mismatch, "time label count differs from T");
  }
}

MatrixXd PanelData::design() const {
  MatrixXd x(N() * T(), K());
  for (Eigen::Index k = 0; k < K(); ++k) {
    x.col(k) = X[k].reshaped();
  }
  return x;
}

MatrixXd PanelData::gram() const {
  MatrixXd g(K(), K());
  for (Eigen::Index k = 0; k < K(); ++k) {
    for (Eigen::Index l = 0; l <= k; ++l) {
      g(k, l) = g(l, k) = X[k].cwiseProduct(X[l]).sum();
    }
  }
  return g;
}

VectorXd PanelData::cross(const MatrixRef& Z) const {
  VectorXd c(K());
  for (Eigen::Index k = 0; k < K(); ++k) c(k) = X[k].cwiseProduct(Z).sum();
  return c;
}

void PanelData::ensure_labels() {
  if (unit_ids.empty()) {
    for (Eigen::Index i = 0; i < N(); ++i) unit_ids.push_back(std::to_string(i + 1));
  }
  if (time_ids.empty()) {
    for (Eigen::Index t = 0; t < T(); ++t) time_ids.push_back(std::to_string(t + 1));
  }
}

MatrixXd linear_index(const PanelData& data, const VectorXd& beta) {
  if (beta.size() != data.K()) {
    fail(ErrorKind::dimension_mismatch,
         "beta has " + std::to_string(beta.size()) + " entries, K = " +
             std::to_string(data.K()));
  }
  MatrixXd out = MatrixXd::Zero(data.N(), data.T());
  for (Eigen::Index k = 0; k < data.K(); ++k) out += beta(k) * data.X[k];
  return out;
}

}  // namespace nnpanel
