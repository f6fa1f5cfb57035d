#pragma once

#include <string>
#include <vector>

#include "nnpanel/matrix_kernel.hpp"

namespace nnpanel {

/// Balanced panel: outcome matrix Y (N x T) and K regressor matrices of the
/// same shape. Rows index units, columns index time periods.
struct PanelData {
  MatrixXd Y;
  std::vector<MatrixXd> X;
  std::vector<std::string> unit_ids;
  std::vector<std::string> time_ids;

  Eigen::Index N() const { return Y.rows(); }
  Eigen::Index T() const { return Y.cols(); }
  Eigen::Index K() const { return static_cast<Eigen::Index>(X.size()); }
  double sqrt_nt() const;

  /// Checks shapes, finiteness and label counts; throws Error on failure.
  void validate() const;

  /// NT x K design matrix of vectorized regressors (column-major vec).
  MatrixXd design() const;
  /// K x K Gram matrix x'x.
  MatrixXd gram() const;
  /// x' vec(Z) for an N x T matrix Z.
  VectorXd cross(const MatrixRef& Z) const;

  /// Fills unit/time labels with "1".."N" and "1".."T" when absent.
  void ensure_labels();
};

/// beta . X = sum_k beta_k X_k.
MatrixXd linear_index(const PanelData& data, const VectorXd& beta);

}  // namespace nnpanel
