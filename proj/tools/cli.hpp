#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nnpanel::cli {

enum class Command { estimate, tune, simulate, diagnose, scan, generate };

struct RunConfig {
  Command command = Command::estimate;

  // Data source: a panel CSV, or a generated design when input_path is empty.
  std::string input_path;
  std::string design = "mc_design";
  long N = 100;
  long T = 100;
  /// simulate only; empty means {N}.
  std::vector<long> sizes;
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
  double error_scale = 1.0;
  int factors = 1;
  int regressors = 1;
  std::string outcome = "linear";

  /// JSON report destination; empty writes to stdout.
  std::string output_path;
  /// CSV artifact for simulate, scan and generate.
  std::string csv_path;

  std::string estimator = "nn-pen";
  /// A positive number, "from-tune", or empty.
  std::string psi;
  std::string tune_report;
  std::optional<int> R;
  int steps = 3;
  int r_max = 8;
  double rank_factor = 2.0;
  std::string loss = "ls";
  double tau = 0.5;
  int max_iter = 10000;
  double tol = 1e-10;

  int replications = 200;
  int threads = 0;
  std::vector<std::string> estimators;
  int post_steps = 3;
  int alt_steps = 5;
  int ls_factors = 2;

  double grid_lo = -1.0;
  double grid_hi = 5.0;
  double grid_step = 0.01;
};

std::string to_string(Command c);

/// Parses argv (flags > --config TOML file > defaults). Returns nullopt after
/// printing help or version; throws Error(invalid_input) on bad arguments.
std::optional<RunConfig> parse_args(int argc, const char* const* argv,
                                    std::ostream& out);

/// Executes one command and writes the JSON report. Returns the exit status:
/// 0 success, 2 input error, 3 numerical failure. Errors are written to
/// `err` as a JSON object.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

int main_entry(int argc, const char* const* argv, std::ostream& out,
               std::ostream& err);

}  // namespace nnpanel::cli
