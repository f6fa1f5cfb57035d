#pragma once

// Dense linear-algebra primitives: thin SVD with a fixed sign convention,
// Schatten norms, column-space projectors, the scalar penalty family
// (ell, q, g) and singular value soft-thresholding.

#include <Eigen/Dense>

namespace nnpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixRef = Eigen::Ref<const MatrixXd>;

/// Thin singular value decomposition A = U diag(s) V'.
///
/// `values` has min(N,T) entries, nonincreasing and nonnegative. Each left
/// singular vector has its first entry of magnitude above 1e-12 made
/// nonnegative (the matching right vector is flipped with it), so results
/// are reproducible.
struct Spectrum {
  VectorXd values;
  MatrixXd left;   // N x q
  MatrixXd right;  // T x q

  Eigen::Index size() const { return values.size(); }
  MatrixXd reconstruct() const;
};

/// Orthogonal projectors onto and orthogonal to the column span of a matrix.
struct Projectors {
  MatrixXd onto;        // P_A
  MatrixXd orthogonal;  // M_A = I - P_A
};

enum class SchattenOrder { nuclear, frobenius, spectral };

enum class PenaltyKind {
  ell,  // 1/2 s^2 below psi, 0 above
  q,    // 1/2 s^2 below psi, psi s - psi^2/2 above
  g,    // q / psi for psi > 0, identity for psi = 0
};

/// Throws Error(invalid_input) if any entry of A is NaN or infinite.
void require_finite(const MatrixRef& A, const char* what);

Spectrum svd(const MatrixRef& A);

/// Singular values only; cheaper than svd() when vectors are not needed.
VectorXd singular_values(const MatrixRef& A);

/// Numerical rank tolerance max(N,T) * s_1 * 1e-12.
double rank_tolerance(const VectorXd& values, Eigen::Index rows,
                      Eigen::Index cols);
int numerical_rank(const VectorXd& values, Eigen::Index rows,
                   Eigen::Index cols);
int numerical_rank(const MatrixRef& A);

double schatten_norm(const MatrixRef& A, SchattenOrder order);
/// Schatten norm from precomputed singular values.
double spectrum_norm(const VectorXd& singular_values, SchattenOrder order);

/// P_A = A (A'A)^+ A'. A with zero columns gives P = 0, M = I.
Projectors projector_pair(const MatrixRef& A);

/// Orthonormal basis of the numerical column span of A (N x rank).
MatrixXd column_basis(const MatrixRef& A);

/// M_basis Z for an orthonormal basis Q: Z - Q (Q' Z).
MatrixXd annihilate(const MatrixRef& basis, const MatrixRef& Z);

double penalty_scalar(double s, double psi, PenaltyKind kind);

/// Sum of penalty_scalar over every singular value of A.
double penalty_matrix(const MatrixRef& A, double psi, PenaltyKind kind);
double penalty_spectrum(const VectorXd& singular_values, double psi,
                        PenaltyKind kind);

/// argmin_G 1/2 ||A - G||_2^2 + psi ||G||_1 = U diag((s - psi)_+) V'.
/// Singular values equal to psi map to exactly zero.
MatrixXd soft_threshold(const MatrixRef& A, double psi);
MatrixXd soft_threshold(const Spectrum& spectrum, double psi);

/// Best rank-r approximation built from the leading r singular triplets.
MatrixXd truncate(const Spectrum& spectrum, Eigen::Index r);

/// Symmetric inverse square root via eigendecomposition. Throws
/// Error(rank_deficient) when an eigenvalue falls below floor times the
/// largest eigenvalue.
MatrixXd inverse_sqrt_spd(const MatrixRef& S, double floor = 1e-14);

}  // namespace nnpanel
