#include "nnpanel/matrix_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnpanel/error.hpp"

namespace nnpanel {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::domain: return "domain";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::collinearity: return "collinearity";
    case ErrorKind::rank_deficient: return "rank_deficient";
    case ErrorKind::parse: return "parse";
    case ErrorKind::unbalanced_panel: return "unbalanced_panel";
    case ErrorKind::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

bool is_input_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input:
    case ErrorKind::domain:
    case ErrorKind::dimension_mismatch:
    case ErrorKind::parse:
    case ErrorKind::unbalanced_panel:
      return true;
    default:
      return false;
  }
}

void require_finite(const MatrixRef& A, const char* what) {
  if (!A.allFinite()) {
    fail(ErrorKind::invalid_input,
         std::string(what) + " contains non-finite entries");
  }
}

namespace {

void require_nonempty(const MatrixRef& A) {
  if (A.rows() < 1 || A.cols() < 1) {
    fail(ErrorKind::invalid_input, "svd requires at least one row and column");
  }
}

void fix_signs(Spectrum& sp) {
  for (Eigen::Index r = 0; r < sp.left.cols(); ++r) {
    for (Eigen::Index i = 0; i < sp.left.rows(); ++i) {
      const double u = sp.left(i, r);
      if (std::abs(u) > 1e-12) {
        if (u < 0) {
          sp.left.col(r) *= -1.0;
          sp.right.col(r) *= -1.0;
        }
        break;
      }
    }
  }
}

}  // namespace

MatrixXd Spectrum::reconstruct() const {
  return left * values.asDiagonal() * right.transpose();
}

Spectrum svd(const MatrixRef& A) {
  require_nonempty(A);
  require_finite(A, "svd input");
  Eigen::BDCSVD<MatrixXd> dec(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) {
    fail(ErrorKind::numerical_failure, "singular value decomposition failed");
  }
  Spectrum sp{dec.singularValues(), dec.matrixU(), dec.matrixV()};
  fix_signs(sp);
  return sp;
}

VectorXd singular_values(const MatrixRef& A) {
  require_nonempty(A);
  require_finite(A, "svd input");
  Eigen::BDCSVD<MatrixXd> dec(A);
  if (dec.info() != Eigen::Success) {
    fail(ErrorKind::numerical_failure, "singular value decomposition failed");
  }
  return dec.singularValues();
}

double rank_tolerance(const VectorXd& values, Eigen::Index rows,
                      Eigen::Index cols) {
  if (values.size() == 0) return 0.0;
  return static_cast<double>(std::max(rows, cols)) * values(0) * 1e-12;
}

int numerical_rank(const VectorXd& values, Eigen::Index rows,
                   Eigen::Index cols) {
  const double tol = rank_tolerance(values, rows, cols);
  int rank = 0;
  for (Eigen::Index r = 0; r < values.size(); ++r) {
    if (values(r) > tol) ++rank;
  }
  return rank;
}

int numerical_rank(const MatrixRef& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  return numerical_rank(singular_values(A), A.rows(), A.cols());
}

double spectrum_norm(const VectorXd& s, SchattenOrder order) {
  if (s.size() == 0) return 0.0;
  switch (order) {
    case SchattenOrder::nuclear: return s.sum();
    case SchattenOrder::frobenius: return s.norm();
    case SchattenOrder::spectral: return s.maxCoeff();
  }
  return 0.0;
}

double schatten_norm(const MatrixRef& A, SchattenOrder order) {
  require_finite(A, "schatten_norm input");
  if (A.size() == 0) return 0.0;
  if (order == SchattenOrder::frobenius) return A.norm();
  return spectrum_norm(singular_values(A), order);
}

MatrixXd column_basis(const MatrixRef& A) {
  if (A.cols() == 0 || A.rows() == 0) return MatrixXd(A.rows(), 0);
  const Spectrum sp = svd(A);
  const int r = numerical_rank(sp.values, A.rows(), A.cols());
  return sp.left.leftCols(r);
}

MatrixXd annihilate(const MatrixRef& basis, const MatrixRef& Z) {
  if (basis.cols() == 0) return Z;
  return Z - basis * (basis.transpose() * Z);
}

Projectors projector_pair(const MatrixRef& A) {
  require_finite(A, "projector input");
  const Eigen::Index n = A.rows();
  const MatrixXd basis = column_basis(A);
  Projectors p;
  p.onto = basis * basis.transpose();
  p.orthogonal = MatrixXd::Identity(n, n) - p.onto;
  return p;
}

double penalty_scalar(double s, double psi, PenaltyKind kind) {
  if (!(s >= 0.0) || !(psi >= 0.0)) {
    fail(ErrorKind::domain, "penalty requires s >= 0 and psi >= 0");
  }
  switch (kind) {
    case PenaltyKind::ell:
      if (psi == 0.0) fail(ErrorKind::domain, "ell penalty requires psi > 0");
      return s < psi ? 0.5 * s * s : 0.0;
    case PenaltyKind::q:
      if (psi == 0.0) fail(ErrorKind::domain, "q penalty requires psi > 0");
      return s < psi ? 0.5 * s * s : psi * s - 0.5 * psi * psi;
    case PenaltyKind::g:
      if (psi == 0.0) return s;
      return s < psi ? 0.5 * s * s / psi : s - 0.5 * psi;
  }
  return 0.0;
}

double penalty_spectrum(const VectorXd& s, double psi, PenaltyKind kind) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < s.size(); ++r) {
    total += penalty_scalar(std::max(0.0, s(r)), psi, kind);
  }
  return total;
}

double penalty_matrix(const MatrixRef& A, double psi, PenaltyKind kind) {
  if (A.size() == 0) {
    // Still validate the parameters.
    penalty_scalar(0.0, psi, kind);
    return 0.0;
  }
  return penalty_spectrum(singular_values(A), psi, kind);
}

MatrixXd soft_threshold(const Spectrum& sp, double psi) {
  if (!(psi > 0.0)) fail(ErrorKind::domain, "soft_threshold requires psi > 0");
  Eigen::Index keep = 0;
  while (keep < sp.values.size() && sp.values(keep) > psi) ++keep;
  const VectorXd shrunk =
      (sp.values.head(keep).array() - psi).matrix();
  return sp.left.leftCols(keep) * shrunk.asDiagonal() *
         sp.right.leftCols(keep).transpose();
}

MatrixXd soft_threshold(const MatrixRef& A, double psi) {
  if (!(psi > 0.0)) fail(ErrorKind::domain, "soft_threshold requires psi > 0");
  return soft_threshold(svd(A), psi);
}

MatrixXd truncate(const Spectrum& sp, Eigen::Index r) {
  r = std::clamp<Eigen::Index>(r, 0, sp.values.size());
  return sp.left.leftCols(r) * sp.values.head(r).asDiagonal() *
         sp.right.leftCols(r).transpose();
}

MatrixXd inverse_sqrt_spd(const MatrixRef& S, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  if (es.info() != Eigen::Success) {
    fail(ErrorKind::numerical_failure, "eigendecomposition failed");
  }
  const VectorXd& ev = es.eigenvalues();
  const double scale = ev.size() ? ev.maxCoeff() : 0.0;
  if (ev.size() && (scale <= 0.0 || ev.minCoeff() <= floor * scale)) {
    fail(ErrorKind::rank_deficient, "matrix is not positive definite");
  }
  return es.eigenvectors() * ev.array().rsqrt().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace nnpanel
