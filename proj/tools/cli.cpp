#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nnpanel/bias_correction.hpp"
#include "nnpanel/diagnostics.hpp"
#include "nnpanel/error.hpp"
#include "nnpanel/estimators.hpp"
#include "nnpanel/panel_io.hpp"
#include "nnpanel/simulation.hpp"
#include "nnpanel/single_index.hpp"
#include "nnpanel/tuning.hpp"

namespace nnpanel::cli {

using json = nlohmann::ordered_json;

namespace {

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json estimation_json(const EstimationResult& r) {
  json path = json::array();
  for (const VectorXd& b : r.beta_path) path.push_back(to_json(b));
  json j;
  j["beta"] = to_json(r.beta);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["gamma_rank"] = r.gamma_rank;
  j["objective"] =
      r.objective_trace.empty() ? json(nullptr) : json(r.objective_trace.back());
  j["objective_trace_length"] = r.objective_trace.size();
  j["beta_path"] = path;
  return j;
}

void add_warnings(json& report, const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) report["warnings"].push_back(w);
}

json config_json(const RunConfig& c) {
  json j;
  j["command"] = to_string(c.command);
  j["input"] = c.input_path;
  if (c.input_path.empty()) {
    j["design"] = c.design;
    j["N"] = c.N;
    j["T"] = c.T;
    j["seed"] = c.seed;
    j["replication"] = c.replication;
    j["error_scale"] = c.error_scale;
    j["factors"] = c.factors;
    j["regressors"] = c.regressors;
    j["outcome"] = c.outcome;
  }
  j["output"] = c.output_path;
  j["csv"] = c.csv_path;
  switch (c.command) {
    case Command::estimate:
      j["estimator"] = c.estimator;
      j["psi"] = c.psi;
      j["tune_report"] = c.tune_report;
      j["R"] = c.R ? json(*c.R) : json(nullptr);
      j["steps"] = c.steps;
      j["loss"] = c.loss;
      j["tau"] = c.tau;
      break;
    case Command::tune:
      j["rank_factor"] = c.rank_factor;
      break;
    case Command::simulate: {
      json sizes = json::array();
      for (long n : c.sizes) sizes.push_back(n);
      j["sizes"] = sizes;
      j["replications"] = c.replications;
      j["threads"] = c.threads;
      j["estimators"] = c.estimators;
      j["post_steps"] = c.post_steps;
      j["alt_steps"] = c.alt_steps;
      j["ls_factors"] = c.ls_factors;
      break;
    }
    case Command::diagnose:
      j["R"] = c.R ? json(*c.R) : json(nullptr);
      j["tune_report"] = c.tune_report;
      break;
    case Command::scan:
      j["R"] = c.R ? json(*c.R) : json(nullptr);
      j["psi"] = c.psi;
      j["tune_report"] = c.tune_report;
      j["grid"] = {c.grid_lo, c.grid_hi, c.grid_step};
      break;
    case Command::generate:
      break;
  }
  j["r_max"] = c.r_max;
  j["max_iter"] = c.max_iter;
  j["tol"] = c.tol;
  return j;
}

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  s.max_iter = c.max_iter;
  s.tol_rel = c.tol;
  return s;
}

DgpSpec dgp_spec(const RunConfig& c, long N, long T) {
  DgpSpec s;
  s.kind = parse_dgp_kind(c.design);
  s.N = N;
  s.T = T;
  s.seed = c.seed;
  s.error_scale = c.error_scale;
  s.factors = c.factors;
  s.regressors = c.regressors;
  if (c.outcome == "probit") {
    s.outcome = OutcomeKind::probit;
  } else if (c.outcome != "linear") {
    fail(ErrorKind::invalid_input, "outcome must be linear or probit");
  }
  return s;
}

struct Loaded {
  PanelData data;
  std::optional<GeneratedPanel> truth;
};

Loaded load(const RunConfig& c) {
  if (!c.input_path.empty()) return {ingest_panel(c.input_path), std::nullopt};
  GeneratedPanel g = generate(dgp_spec(c, c.N, c.T), c.replication);
  PanelData d = g.data;
  return {std::move(d), std::move(g)};
}

struct TuneValues {
  double psi_hat = 0.0;
  int r_hat = 0;
  VectorXd beta_star;
  std::string source;
};

TuneValues read_tune_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_input, "cannot open tune report " + path);
  json j;
  try {
    j = json::parse(in);
    const json& r = j.at("results");
    TuneValues t;
    t.psi_hat = r.at("psi_hat").get<double>();
    t.r_hat = r.at("r_hat").get<int>();
    const std::vector<double> b = r.at("beta_star").get<std::vector<double>>();
    t.beta_star = Eigen::Map<const VectorXd>(b.data(), b.size());
    t.source = path;
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, "tune report " + path + ": " + e.what());
  }
}

class Tuner {
 public:
  Tuner(const RunConfig& c, const PanelData& d) : c_(c), d_(d) {}

  const TuneValues& get() {
    if (!values_) {
      if (!c_.tune_report.empty()) {
        values_ = read_tune_report(c_.tune_report);
        if (values_->beta_star.size() != d_.K()) {
          fail(ErrorKind::invalid_input,
               "tune report beta_star length differs from the panel's K");
        }
      } else {
        const TuningReport rep = select_psi(d_, c_.r_max, solver_config(c_),
                                            c_.rank_factor);
        values_ = TuneValues{rep.psi_hat, rep.r_hat, rep.beta_star, "inline"};
      }
    }
    return *values_;
  }

  VectorXd beta_star() {
    if (values_ || !c_.tune_report.empty()) return get().beta_star;
    if (!star_) star_ = fit_nn_min(d_, solver_config(c_)).beta;
    return *star_;
  }

  double psi(bool required) {
    if (c_.psi.empty()) {
      if (required) fail(ErrorKind::invalid_input, "--psi is required");
      return get().psi_hat;
    }
    if (c_.psi == "from-tune") return get().psi_hat;
    double v = 0.0;
    std::istringstream in(c_.psi);
    in >> v;
    if (!in || !in.eof()) {
      fail(ErrorKind::invalid_input,
           "--psi must be a number or from-tune, got '" + c_.psi + "'");
    }
    return v;
  }

  int rank() { return c_.R ? *c_.R : get().r_hat; }

  const std::optional<TuneValues>& used() const { return values_; }

 private:
  const RunConfig& c_;
  const PanelData& d_;
  std::optional<TuneValues> values_;
  std::optional<VectorXd> star_;
};

void require_positive_psi(double psi) {
  if (!(psi > 0.0)) {
    fail(ErrorKind::invalid_input, "psi must be positive for this estimator");
  }
}

LossSpec loss_spec(const RunConfig& c) {
  LossSpec s;
  s.tau = c.tau;
  if (c.loss == "ls") {
    s.kind = LossKind::least_squares;
  } else if (c.loss == "probit") {
    s.kind = LossKind::probit;
  } else if (c.loss == "quantile") {
    s.kind = LossKind::quantile;
  } else {
    fail(ErrorKind::invalid_input, "loss must be ls, probit or quantile");
  }
  return s;
}

json tune_section(const Tuner& t) {
  if (!t.used()) return nullptr;
  return {{"psi_hat", t.used()->psi_hat},
          {"r_hat", t.used()->r_hat},
          {"source", t.used()->source}};
}

void cmd_estimate(const RunConfig& c, json& report) {
  const Loaded in = load(c);
  const PanelData& d = in.data;
  Tuner tuner(c, d);
  const SolverConfig sc = solver_config(c);
  EstimationResult r;
  json extra = json::object();
  const std::string& e = c.estimator;
  if (e == "pols") {
    r = pooled_ols(d);
  } else if (e == "nn-min") {
    r = fit_nn_min(d, sc);
  } else if (e == "nn-pen") {
    const double psi = tuner.psi(true);
    require_positive_psi(psi);
    r = fit_nn_penalized(d, psi, sc);
    extra["psi"] = psi;
  } else if (e == "ls") {
    const int R = tuner.rank();
    r = fit_ls_local(d, R, tuner.beta_star(), sc);
    extra["R"] = R;
  } else if (e == "post") {
    const int R = tuner.rank();
    r = post_iterate(d, R, tuner.beta_star(), c.steps);
    extra["R"] = R;
    extra["steps"] = c.steps;
  } else if (e == "alt") {
    const double psi = tuner.psi(true);
    require_positive_psi(psi);
    const int R = tuner.rank();
    const VectorXd start =
        fit_nn_penalized(d, psi, tuner.beta_star(), sc).beta;
    r = alt_bc_iterate(d, psi, R, start, c.steps, sc);
    extra["psi"] = psi;
    extra["R"] = R;
    extra["steps"] = c.steps;
  } else if (e == "single-index") {
    const double psi = tuner.psi(true);
    require_positive_psi(psi);
    r = fit_single_index(d, loss_spec(c), psi);
    extra["psi"] = psi;
    extra["loss"] = c.loss;
  } else {
    fail(ErrorKind::invalid_input,
         "unknown estimator '" + e +
             "' (pols, nn-min, nn-pen, ls, post, alt, single-index)");
  }
  json res;
  res["estimator"] = e;
  res["N"] = d.N();
  res["T"] = d.T();
  res["K"] = d.K();
  for (auto& [k, v] : extra.items()) res[k] = v;
  const json fit = estimation_json(r);
  for (auto& [k, v] : fit.items()) res[k] = v;
  if (in.truth) res["beta0"] = to_json(in.truth->beta0);
  res["tune"] = tune_section(tuner);
  report["results"] = res;
  add_warnings(report, r.warnings);
}

void cmd_tune(const RunConfig& c, json& report) {
  const Loaded in = load(c);
  const TuningReport t =
      select_psi(in.data, c.r_max, solver_config(c), c.rank_factor);
  json res;
  res["psi_hat"] = t.psi_hat;
  res["r_hat"] = t.r_hat;
  res["r_max"] = t.r_max;
  res["rank_factor"] = t.rank_factor;
  res["beta_star"] = to_json(t.beta_star);
  res["residual_singular_values"] = to_json(t.residual_spectrum.values);
  report["results"] = res;
  add_warnings(report, t.warnings);
}

void cmd_simulate(const RunConfig& c, json& report) {
  ExperimentConfig ec;
  ec.replications = c.replications;
  ec.threads = c.threads;
  ec.r_max = c.r_max;
  ec.ls_factors = c.ls_factors;
  ec.post_steps = c.post_steps;
  ec.alt_steps = c.alt_steps;
  ec.estimators = c.estimators;
  ec.solver = solver_config(c);
  std::vector<DgpSpec> grid;
  const std::vector<long> sizes = c.sizes.empty() ? std::vector<long>{c.N} : c.sizes;
  for (long n : sizes) grid.push_back(dgp_spec(c, n, c.sizes.empty() ? c.T : n));
  const std::vector<ExperimentResult> results = run_experiments(grid, ec);
  json out = json::array();
  for (const ExperimentResult& r : results) {
    json j;
    j["N"] = r.spec.N;
    j["T"] = r.spec.T;
    j["beta0"] = to_json(r.beta0);
    j["replications"] = r.replications;
    j["failures"] = r.failures;
    json freq = json::object();
    for (const auto& [rank, count] : r.r_hat_frequency) {
      freq[std::to_string(rank)] = count;
    }
    j["r_hat_frequency"] = freq;
    json est = json::array();
    for (const EstimatorSummary& s : r.estimators) {
      est.push_back({{"name", s.name},
                     {"bias", to_json(s.bias)},
                     {"std", to_json(s.std)},
                     {"rmse", to_json(s.rmse)},
                     {"count", s.count}});
    }
    j["estimators"] = est;
    j["seconds"] = r.seconds;
    out.push_back(j);
    add_warnings(report, r.failure_messages);
  }
  report["results"] = out;
  if (!c.csv_path.empty()) {
    std::ofstream csv(c.csv_path);
    if (!csv) fail(ErrorKind::invalid_input, "cannot write " + c.csv_path);
    write_experiment_csv(csv, results);
  }
}

void cmd_diagnose(const RunConfig& c, json& report) {
  const Loaded in = load(c);
  const PanelData& d = in.data;
  if (d.K() == 0) fail(ErrorKind::invalid_input, "diagnose needs K >= 1");
  Tuner tuner(c, d);
  FactorPair fp;
  json res;
  if (in.truth && !c.R) {
    fp = {in.truth->lambda0, in.truth->f0};
    res["factor_source"] = "design";
  } else {
    const int R = tuner.rank();
    fp = pca_factors(combine(d, tuner.beta_star()), R);
    res["factor_source"] = "principal components of Y - beta_star.X";
  }
  res["R0"] = fp.rank();
  const IdentificationReport id =
      identification_margin(d.X, fp.loadings, fp.factors);
  res["identification"] = {{"margin", id.margin},
                           {"argmin_alpha", to_json(id.argmin_alpha)},
                           {"grid_resolution", id.grid_resolution},
                           {"identified", id.margin > 0}};
  json rsc = json::array();
  for (Eigen::Index k = 0; k < d.K(); ++k) {
    const RscReport r = rsc_lower_bound(d.X[k], fp.loadings, fp.factors);
    std::vector<double> a, b;
    for (const RscStep& st : r.q_schedule) {
      a.push_back(st.a);
      b.push_back(st.b);
    }
    json j;
    j["regressor"] = k + 1;
    j["mu_bound"] = std::isinf(r.mu_bound) ? json("inf") : json(r.mu_bound);
    j["r0_used"] = r.r0_used;
    j["a"] = to_json(a);
    j["b"] = to_json(b);
    if (!r.note.empty()) j["note"] = r.note;
    rsc.push_back(j);
  }
  res["rsc"] = rsc;
  res["tune"] = tune_section(tuner);
  report["results"] = res;
}

json minima_json(const ScanTable& t, const LocalMinima& m,
                 const std::vector<double>& values) {
  json strict = json::array(), plateaus = json::array();
  for (std::size_t i : m.strict) strict.push_back(t.beta[i](0));
  for (std::size_t i : m.plateaus) plateaus.push_back(t.beta[i](0));
  const std::size_t best =
      std::min_element(values.begin(), values.end()) - values.begin();
  return {{"count", m.count()},
          {"locations", strict},
          {"plateaus", plateaus},
          {"global_argmin", t.beta[best](0)},
          {"global_min", values[best]}};
}

void cmd_scan(const RunConfig& c, json& report) {
  const Loaded in = load(c);
  const PanelData& d = in.data;
  if (d.K() != 1) fail(ErrorKind::invalid_input, "scan needs K = 1");
  Tuner tuner(c, d);
  const int R = c.R ? *c.R : tuner.rank();
  const double psi = tuner.psi(false);
  require_positive_psi(psi);
  const ScanTable t = objective_scan(
      d, scalar_grid(c.grid_lo, c.grid_hi, c.grid_step), R, psi,
      c.threads > 0 ? c.threads : 1);
  json res;
  res["R"] = R;
  res["psi"] = psi;
  res["points"] = t.beta.size();
  res["L_R"] = minima_json(t, t.ls_minima, t.ls);
  res["Q_psi"] = minima_json(t, t.penalized_minima, t.penalized);
  res["tune"] = tune_section(tuner);
  report["results"] = res;
  if (!c.csv_path.empty()) {
    std::ofstream csv(c.csv_path);
    if (!csv) fail(ErrorKind::invalid_input, "cannot write " + c.csv_path);
    write_scan_csv(csv, t);
  }
}

void cmd_generate(const RunConfig& c, json& report) {
  if (c.csv_path.empty()) fail(ErrorKind::invalid_input, "generate needs --csv");
  const DgpSpec spec = dgp_spec(c, c.N, c.T);
  const GeneratedPanel g = generate(spec, c.replication);
  write_panel(c.csv_path, g.data);
  report["results"] = {{"design", to_string(spec.kind)},
                       {"N", g.data.N()},
                       {"T", g.data.T()},
                       {"K", g.data.K()},
                       {"beta0", to_json(g.beta0)},
                       {"path", c.csv_path}};
}

void write_report(const RunConfig& c, const json& report, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (c.output_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.output_path);
  if (!f) fail(ErrorKind::invalid_input, "cannot write " + c.output_path);
  f << text;
}

void write_error(std::ostream& err, std::string_view kind,
                 const std::string& message) {
  json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  err << j.dump() << "\n";
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::estimate:
      return "estimate";
    case Command::tune:
      return "tune";
    case Command::simulate:
      return "simulate";
    case Command::diagnose:
      return "diagnose";
    case Command::scan:
      return "scan";
    case Command::generate:
      return "generate";
  }
  return "unknown";
}

std::optional<RunConfig> parse_args(int argc, const char* const* argv,
                                    std::ostream& out) {
  RunConfig c;
  CLI::App app{"Nuclear-norm regularized estimation of interactive fixed "
               "effects panel models"};
  app.set_version_flag("--version", "nnpanel 0.1.0");
  app.set_config("--config", "", "TOML file with option values");
  app.require_subcommand(1);

  auto data_options = [&](CLI::App* s) {
    s->add_option("--input,-i", c.input_path, "Panel CSV (unit,time,y,x1..xK)")
        ->check(CLI::ExistingFile);
    s->add_option("--design", c.design,
                  "Generated design when no input: mc_design, "
                  "nonconvex_demo, custom")
        ->capture_default_str();
    s->add_option("--N", c.N, "Units of the generated design")
        ->capture_default_str();
    s->add_option("--T", c.T, "Periods of the generated design")
        ->capture_default_str();
    s->add_option("--seed", c.seed)->capture_default_str();
    s->add_option("--replication", c.replication,
                  "Replication index of the generated panel")
        ->capture_default_str();
    s->add_option("--error-scale", c.error_scale)->capture_default_str();
    s->add_option("--factors", c.factors, "Factors of the custom design")
        ->capture_default_str();
    s->add_option("--regressors", c.regressors, "Regressors of the custom design")
        ->capture_default_str();
    s->add_option("--outcome", c.outcome, "linear or probit (custom design)")
        ->capture_default_str();
  };
  auto common = [&](CLI::App* s) {
    s->add_option("--output,-o", c.output_path, "JSON report path (default stdout)");
    s->add_option("--r-max", c.r_max, "Rank cap of the tuning rule")
        ->capture_default_str();
    s->add_option("--max-iter", c.max_iter)->capture_default_str();
    s->add_option("--tol", c.tol)->capture_default_str();
  };
  auto tuned = [&](CLI::App* s) {
    s->add_option("--tune-report", c.tune_report,
                  "JSON report of a previous tune run")
        ->check(CLI::ExistingFile);
    s->add_option("--R", c.R, "Number of factors (default: r_hat)");
  };

  CLI::App* est = app.add_subcommand("estimate", "Fit one estimator");
  data_options(est);
  common(est);
  tuned(est);
  est->add_option("--estimator,-e", c.estimator,
                  "pols, nn-min, nn-pen, ls, post, alt, single-index")
      ->capture_default_str();
  est->add_option("--psi", c.psi, "Penalty, or from-tune");
  est->add_option("--steps", c.steps, "post/alt iterations")->capture_default_str();
  est->add_option("--loss", c.loss, "single-index loss: ls, probit, quantile")
      ->capture_default_str();
  est->add_option("--tau", c.tau, "Quantile level")->capture_default_str();
  est->callback([&] { c.command = Command::estimate; });

  CLI::App* tune = app.add_subcommand("tune", "Data-driven psi and rank");
  data_options(tune);
  common(tune);
  tune->add_option("--rank-factor", c.rank_factor)->capture_default_str();
  tune->callback([&] { c.command = Command::tune; });

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo experiment");
  data_options(sim);
  common(sim);
  sim->add_option("--sizes", c.sizes, "N = T values (default: --N/--T)")
      ->delimiter(',');
  sim->add_option("--replications", c.replications)->capture_default_str();
  sim->add_option("--threads", c.threads, "0 uses all cores")
      ->capture_default_str();
  sim->add_option("--estimators", c.estimators,
                  "Subset of POLS,LS,NN*,NNpen,POST,ALT")
      ->delimiter(',');
  sim->add_option("--post-steps", c.post_steps)->capture_default_str();
  sim->add_option("--alt-steps", c.alt_steps)->capture_default_str();
  sim->add_option("--ls-factors", c.ls_factors)->capture_default_str();
  sim->add_option("--csv", c.csv_path, "Summary table CSV");
  sim->callback([&] { c.command = Command::simulate; });

  CLI::App* diag = app.add_subcommand(
      "diagnose", "Identification margin and restricted strong convexity");
  data_options(diag);
  common(diag);
  tuned(diag);
  diag->callback([&] { c.command = Command::diagnose; });

  CLI::App* scan = app.add_subcommand("scan", "Profile objectives on a grid (K = 1)");
  data_options(scan);
  common(scan);
  tuned(scan);
  scan->add_option("--psi", c.psi, "Penalty, or from-tune (default)");
  scan->add_option("--lo", c.grid_lo)->capture_default_str();
  scan->add_option("--hi", c.grid_hi)->capture_default_str();
  scan->add_option("--step", c.grid_step)->capture_default_str();
  scan->add_option("--threads", c.threads)->capture_default_str();
  scan->add_option("--csv", c.csv_path, "Grid values CSV");
  scan->callback([&] { c.command = Command::scan; });

  CLI::App* gen = app.add_subcommand("generate", "Write a generated panel CSV");
  data_options(gen);
  common(gen);
  gen->add_option("--csv", c.csv_path, "Destination CSV")->required();
  gen->callback([&] { c.command = Command::generate; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, out);
    return std::nullopt;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, out);
    return std::nullopt;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, out);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    fail(ErrorKind::invalid_input, e.what());
  }
  return c;
}

int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  json report;
  report["config"] = config_json(c);
  report["results"] = nullptr;
  report["warnings"] = json::array();
  try {
    switch (c.command) {
      case Command::estimate:
        cmd_estimate(c, report);
        break;
      case Command::tune:
        cmd_tune(c, report);
        break;
      case Command::simulate:
        cmd_simulate(c, report);
        break;
      case Command::diagnose:
        cmd_diagnose(c, report);
        break;
      case Command::scan:
        cmd_scan(c, report);
        break;
      case Command::generate:
        cmd_generate(c, report);
        break;
    }
    report["timing"] = {
        {"seconds", std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count()}};
    write_report(c, report, out);
  } catch (const Error& e) {
    write_error(err, nnpanel::to_string(e.kind()), e.what());
    return is_input_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
    return 3;
  }
  return 0;
}

int main_entry(int argc, const char* const* argv, std::ostream& out,
               std::ostream& err) {
  std::optional<RunConfig> c;
  try {
    c = parse_args(argc, argv, out);
  } catch (const Error& e) {
    write_error(err, nnpanel::to_string(e.kind()), e.what());
    return 2;
  }
  if (!c) return 0;
  return run(*c, out, err);
}

}  // namespace nnpanel::cli
