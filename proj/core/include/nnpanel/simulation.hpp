#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "nnpanel/estimators.hpp"

namespace nnpanel {

enum class DgpKind {
  /// Y = b1 + b2 X + l0 f0' + E,
  /// X = 1 + Ex + sum_r (l0 + lx)_ir (f0_tr + f0_{t-1,r});
  /// f0 ~ N(0,1) with one presample period, l0, lx ~ N(1,1), K = 2 with
  /// X1 = 1.
  mc_design,
  /// Y = b X + l0 f0' + E, X = 0.04 Ex + l0_i1 f0_t2 + lx_i fx_t;
  /// l0_i, f0_t bivariate normal with correlation 0.5, lx, fx ~ 2 chi2(1).
  nonconvex_demo,
  /// K regressors X_k = lx_k fx_k' + 0.5 l0_1 f0_1' + Ex_k with R0 factors
  /// l0, f0 ~ N(0, loading_scale^2); outcome linear or probit.
  custom,
};

enum class OutcomeKind { linear, probit };

struct DgpSpec {
  DgpKind kind = DgpKind::mc_design;
  Eigen::Index N = 100;
  Eigen::Index T = 100;
  /// Empty selects the design default: (1, 1) for mc_design, 2 for
  /// nonconvex_demo, all ones for custom.
  VectorXd beta0;
  std::uint64_t seed = 1;
  /// Multiplies E (linear outcomes only).
  double error_scale = 1.0;
  int factors = 1;
  int regressors = 1;
  OutcomeKind outcome = OutcomeKind::linear;
  double loading_scale = 1.0;
};

struct GeneratedPanel {
  PanelData data;
  VectorXd beta0;
  MatrixXd gamma0;
  MatrixXd E;
  MatrixXd lambda0;
  MatrixXd f0;
};

/// Throws Error(invalid_input) for N, T < 2 or inconsistent beta0.
void validate_dgp(const DgpSpec& spec);
VectorXd default_beta0(const DgpSpec& spec);

/// Random stream for one replication: a pure function of (seed, replication,
/// stream).
std::mt19937_64 replication_stream(std::uint64_t seed, std::uint64_t replication,
                                   std::uint64_t stream = 0);

GeneratedPanel generate(const DgpSpec& spec, std::uint64_t replication = 0);

struct ExperimentConfig {
  int replications = 200;
  /// 0 uses std::thread::hardware_concurrency().
  int threads = 0;
  int r_max = 8;
  /// Factor count of the LS column.
  int ls_factors = 2;
  int post_steps = 3;
  int alt_steps = 5;
  /// Subset of POLS, LS, NN*, NNpen, POST, ALT; empty runs all.
  std::vector<std::string> estimators;
  SolverConfig solver;
};

struct EstimatorSummary {
  std::string name;
  /// NaN without successful replications; std needs at least two.
  VectorXd bias;
  VectorXd std;
  VectorXd rmse;
  int count = 0;
  /// One row per replication; NaN rows for failed replications.
  std::vector<VectorXd> estimates;
};

struct ExperimentResult {
  DgpSpec spec;
  VectorXd beta0;
  int replications = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  std::vector<EstimatorSummary> estimators;
  std::map<int, int> r_hat_frequency;
  std::vector<double> psi_hat;
  double seconds = 0.0;

  const EstimatorSummary* find(const std::string& name) const;
};

/// When psi_hat = 0 (residual at beta_star of rank <= r_max) the NNpen and
/// ALT columns report beta_star.
ExperimentResult run_experiment(const DgpSpec& spec,
                                const ExperimentConfig& config = {});
std::vector<ExperimentResult> run_experiments(const std::vector<DgpSpec>& grid,
                                              const ExperimentConfig& config = {});

/// Long table: N,T,estimator,coefficient,bias,std,rmse,count.
void write_experiment_csv(std::ostream& out,
                          const std::vector<ExperimentResult>& results);

std::string to_string(DgpKind kind);
DgpKind parse_dgp_kind(const std::string& name);

}  // namespace nnpanel
