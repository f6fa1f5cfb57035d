#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "nnpanel/panel.hpp"

namespace nnpanel {

struct IdentificationReport {
  /// min over |alpha| = 1 of
  /// |M_l (alpha.X) M_f|_1 / sqrt(NT) - |P_l (alpha.X) P_f|_1 / sqrt(NT).
  double margin = 0.0;
  VectorXd argmin_alpha;
  /// Number of sphere points evaluated before the polish.
  int grid_resolution = 0;
};

/// K = 1 evaluates alpha = 1 (the margin is even in alpha). K > 1 searches
/// `grid` points on the unit sphere (0 means 512 K) followed by a coordinate
/// polish.
IdentificationReport identification_margin(const std::vector<MatrixXd>& X,
                                           const MatrixRef& lambda0,
                                           const MatrixRef& f0, int grid = 0);

/// Margin at one direction alpha (normalized internally).
double identification_gap(const std::vector<MatrixXd>& X,
                          const MatrixRef& lambda0, const MatrixRef& f0,
                          const VectorXd& alpha);

struct RscStep {
  int q = 0;
  double a = 0.0;
  double b = 0.0;
};

struct RscReport {
  /// min_q a(q) + max(0, b(q))^2; +infinity when R0 = 0.
  double mu_bound = std::numeric_limits<double>::infinity();
  std::vector<RscStep> q_schedule;
  int r0_used = 0;
  std::string note;
};

/// Restricted strong convexity lower bound for a single regressor, built
/// from the singular values s_r of M_l X M_f:
///   a(q) = [(q-1) s_q^2 + sum_{r>=q} s_r^2] / NT
///   b(q) = [sum_{r<=q-2} (s_r - s_q) / (3 sqrt(2 R0)) - |X - M_l X M_f|_inf]
///          / sqrt(NT)
/// for q = 1 .. min(N,T) - R0.
RscReport rsc_lower_bound(const MatrixRef& X, const MatrixRef& lambda0,
                          const MatrixRef& f0);

struct LocalMinima {
  /// Interior grid points strictly below both neighbours.
  std::vector<std::size_t> strict;
  /// Interior points not above either neighbour with at least one tie.
  std::vector<std::size_t> plateaus;
  std::size_t count() const { return strict.size(); }
};

struct ScanTable {
  std::vector<VectorXd> beta;
  std::vector<double> ls;         // L_R
  std::vector<double> penalized;  // Q_psi
  int R = 0;
  double psi = 0.0;
  LocalMinima ls_minima;
  LocalMinima penalized_minima;
};

LocalMinima find_local_minima(const std::vector<double>& values);

/// Evaluates L_R and Q_psi at every grid point from one residual spectrum each.
/// Local minima are counted along the grid order, which is meaningful for
/// K = 1 grids sorted by beta.
ScanTable objective_scan(const PanelData& data,
                         const std::vector<VectorXd>& beta_grid, int R,
                         double psi, int threads = 1);

/// Evenly spaced scalar grid lo, lo + step, ..., up to hi (inclusive within
/// half a step).
std::vector<VectorXd> scalar_grid(double lo, double hi, double step);

/// Header beta1..betaK,L_R,Q_psi; values printed with 17 significant digits.
void write_scan_csv(std::ostream& out, const ScanTable& table);

}  // namespace nnpanel
