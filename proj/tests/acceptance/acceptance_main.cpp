// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nnpanel/bias_correction.hpp"
#include "nnpanel/diagnostics.hpp"
#include "nnpanel/error.hpp"
#include "nnpanel/estimators.hpp"
#include "nnpanel/simulation.hpp"
#include "nnpanel/single_index.hpp"
#include "nnpanel/tuning.hpp"
#include "test_support.hpp"

namespace {

using namespace nnpanel;
using testing::gaussian;
using testing::median;
using testing::random_panel;
using testing::rel_diff;
using testing::rng_for;
using testing::uniform;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double nuclear(const MatrixXd& A) {
  return schatten_norm(A, SchattenOrder::nuclear);
}

Verdict prox_oracle() {
  auto rng = rng_for(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const MatrixXd A = gaussian(rng, 6, 5, uniform(rng, 0.2, 3.0));
    for (double psi : {0.1, 0.5, 2.0}) {
      const MatrixXd G = soft_threshold(A, psi);
      const double attained =
          0.5 * (A - G).squaredNorm() + psi * nuclear(G);
      worst = std::max(worst,
                       rel_diff(attained, penalty_matrix(A, psi, PenaltyKind::q)));
    }
  }
  return {worst <= 1e-10, fmt("max relative gap %.2e over 300 cases", worst)};
}

Verdict dual_route() {
  auto rng = rng_for(102);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index N = 4 + i % 9, T = 3 + (i * 7) % 11;
    const int K = 1 + i % 3;
    const PanelData d =
        random_panel(rng, N, T, VectorXd::Constant(K, 1.0), 1 + i % 2);
    const VectorXd beta = testing::gaussian_vector(rng, K, 2.0);
    const double psi = std::exp(uniform(rng, std::log(0.01), std::log(5.0)));
    const double nt = static_cast<double>(N * T);
    const MatrixXd R = combine(d, beta);
    const MatrixXd G = soft_threshold(R, std::sqrt(nt) * psi);
    const double joint =
        (R - G).squaredNorm() / (2.0 * nt) + psi / std::sqrt(nt) * nuclear(G);
    worst = std::max(worst,
                     rel_diff(penalized_profile(d, beta, psi).value, joint));
  }
  return {worst <= 1e-10, fmt("max relative gap %.2e over 100 triples", worst)};
}

Verdict g_inequalities() {
  auto rng = rng_for(103);
  double slack[3] = {std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity()};
  auto g = [](const MatrixXd& A, double psi) {
    return penalty_matrix(A, psi, PenaltyKind::g);
  };
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index N = 5 + i % 6, T = 4 + (i * 3) % 7;
    const Eigen::Index rank = 1 + i % std::min(N, T);
    const MatrixXd A =
        gaussian(rng, N, rank) * gaussian(rng, T, rank).transpose();
    const MatrixXd B = gaussian(rng, N, T, uniform(rng, 0.01, 2.0));
    const Eigen::Index r = 1 + i % 3;
    const Projectors pl = projector_pair(gaussian(rng, N, r));
    const Projectors pf = projector_pair(gaussian(rng, T, r));
    const double psi = std::exp(uniform(rng, std::log(0.01), std::log(10.0)));
    const double gA = g(A, psi);
    slack[0] = std::min(slack[0],
                        gA - (nuclear(A) - 0.5 * psi * numerical_rank(A)));
    slack[1] = std::min({slack[1], gA + nuclear(B) - g(A + B, psi),
                         g(A + B, psi) - (gA - nuclear(B))});
    slack[2] = std::min(
        slack[2], gA - g(pl.orthogonal * A * pf.orthogonal, psi) -
                      g(pl.onto * A * pf.onto, psi));
  }
  const double worst = std::min({slack[0], slack[1], slack[2]});
  return {worst >= -1e-9, fmt("min slack (i) %.2e, (ii) %.2e, (iii) %.2e",
                              slack[0], slack[1], slack[2])};
}

Verdict convexity_chords() {
  auto rng = rng_for(104);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 500; ++i) {
    const int K = 1 + i % 2;
    const PanelData d = random_panel(rng, 8, 7, VectorXd::Constant(K, 1.0), 2);
    const VectorXd a = testing::gaussian_vector(rng, K, 2.0);
    const VectorXd b = testing::gaussian_vector(rng, K, 2.0);
    const double t = uniform(rng, 0.0, 1.0);
    const double psi = uniform(rng, 0.05, 2.0);
    const VectorXd m = t * a + (1.0 - t) * b;
    const double q_gap = penalized_profile(d, m, psi).value -
                         t * penalized_profile(d, a, psi).value -
                         (1.0 - t) * penalized_profile(d, b, psi).value;
    const double n_gap = nuclear_objective(d, m) -
                         t * nuclear_objective(d, a) -
                         (1.0 - t) * nuclear_objective(d, b);
    worst = std::max({worst, q_gap, n_gap});
  }
  return {worst <= 1e-10, fmt("max chord violation %.2e over 500 triples", worst)};
}

std::string locations(const ScanTable& t, const std::vector<std::size_t>& idx) {
  std::ostringstream s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    s << (i ? "," : "") << t.beta[idx[i]](0);
  }
  return "[" + s.str() + "]";
}

Verdict landscape_scan() {
  DgpSpec spec;
  spec.kind = DgpKind::nonconvex_demo;
  spec.N = 200;
  spec.T = 200;
  spec.seed = 1;
  const PanelData d = generate(spec).data;
  const TuningReport tune = select_psi(d);
  const ScanTable t = objective_scan(d, scalar_grid(-1.0, 5.0, 0.01), 2,
                                     tune.psi_hat);
  const std::size_t best =
      std::min_element(t.ls.begin(), t.ls.end()) - t.ls.begin();
  const double argmin = t.beta[best](0);
  const std::size_t ls_count = t.ls_minima.count();
  const std::size_t q_count = t.penalized_minima.count();
  const bool pass = ls_count >= 2 && std::abs(argmin - 2.0) <= 0.2 &&
                    q_count == 1;
  return {pass, fmt("L_R minima %zu at %s, argmin %.2f; Q_psi minima %zu at "
                    "%s (psi_hat %.4f)",
                    ls_count, locations(t, t.ls_minima.strict).c_str(), argmin,
                    q_count, locations(t, t.penalized_minima.strict).c_str(),
                    tune.psi_hat)};
}

Verdict psi_limit() {
  DgpSpec spec;
  spec.N = 50;
  spec.T = 50;
  spec.seed = 1;
  const PanelData d = generate(spec).data;
  const VectorXd star = fit_nn_min(d).beta;
  std::vector<double> dist;
  for (double psi : {1e-2, 1e-3, 1e-4}) {
    dist.push_back((fit_nn_penalized(d, psi, star, SolverConfig{}).beta - star)
                       .norm());
  }
  const bool pass = dist[1] < dist[0] && dist[2] < dist[1] && dist[2] <= 1e-3;
  return {pass, fmt("distances %.2e, %.2e, %.2e", dist[0], dist[1], dist[2])};
}

Verdict pooled_degeneracy() {
  auto rng = rng_for(107);
  double worst = 0.0;
  bool zero = true;
  for (int i = 0; i < 20; ++i) {
    const PanelData d =
        random_panel(rng, 15 + i, 12 + i % 5, VectorXd::Constant(2, 1.0), 0);
    const VectorXd ols = pooled_ols(d).beta;
    const double top = singular_values(combine(d, ols))(0) / d.sqrt_nt();
    const EstimationResult r = fit_nn_penalized(d, 1.01 * top);
    zero = zero && r.gamma.size() > 0 && (r.gamma.array() == 0.0).all() &&
           r.gamma_rank == 0;
    worst = std::max(worst, (r.beta - ols).norm() / std::max(1.0, ols.norm()));
  }
  return {zero && worst <= 1e-10,
          fmt("gamma exactly zero: %s; max |beta - OLS| %.2e over 20 panels",
              zero ? "yes" : "no", worst)};
}

struct MonteCarlo {
  ExperimentResult large;  // N = T = 100, every estimator
  ExperimentResult small;  // N = T = 50, NN* only
};

MonteCarlo run_monte_carlo() {
  ExperimentConfig cfg;
  cfg.replications = 200;
  cfg.alt_steps = 3;
  cfg.post_steps = 3;
  DgpSpec spec;
  spec.seed = 2024;
  spec.N = spec.T = 100;
  MonteCarlo mc;
  mc.large = run_experiment(spec, cfg);
  cfg.estimators = {"NN*"};
  spec.N = spec.T = 50;
  mc.small = run_experiment(spec, cfg);
  return mc;
}

Verdict rate_shape(const MonteCarlo& mc) {
  const EstimatorSummary* a = mc.small.find("NN*");
  const EstimatorSummary* b = mc.large.find("NN*");
  const double ratio = a->rmse.norm() / b->rmse.norm();
  return {ratio >= 1.1 && ratio <= 2.0 && mc.small.failures == 0,
          fmt("NN* |RMSE| %.4f at N=50, %.4f at N=100, ratio %.3f (slope "
              "alone %.3f)",
              a->rmse.norm(), b->rmse.norm(), ratio, a->rmse(1) / b->rmse(1))};
}

Verdict post_equivalence(const MonteCarlo& mc) {
  const EstimatorSummary* p2 = mc.large.find("POST(2)");
  const EstimatorSummary* p3 = mc.large.find("POST(3)");
  const EstimatorSummary* ls = mc.large.find("LS");
  std::vector<double> to_ls, to_next;
  for (int r = 0; r < mc.large.replications; ++r) {
    const VectorXd& b2 = p2->estimates[r];
    if (!b2.allFinite()) continue;
    to_ls.push_back((b2 - ls->estimates[r]).norm());
    to_next.push_back((b2 - p3->estimates[r]).norm());
  }
  const double m_ls = median(to_ls), m_next = median(to_next);
  return {m_ls <= 1e-3 && m_next <= 1e-4,
          fmt("median |POST(2) - LS| %.2e, median |POST(2) - POST(3)| %.2e "
              "(%zu replications)",
              m_ls, m_next, to_ls.size())};
}

Verdict rank_recovery(const MonteCarlo& mc) {
  const auto& f = mc.large.r_hat_frequency;
  const int hits = f.count(2) ? f.at(2) : 0;
  std::ostringstream s;
  for (const auto& [r, n] : f) s << " R=" << r << ":" << n;
  return {hits >= 190, fmt("R_hat = 2 in %d of %d;%s", hits,
                           mc.large.replications, s.str().c_str())};
}

Verdict bias_ordering(const MonteCarlo& mc) {
  const VectorXd& pen = mc.large.find("NNpen")->bias;
  const VectorXd& post = mc.large.find("POST(2)")->bias;
  const VectorXd& alt = mc.large.find("ALT(3)")->bias;
  return {post.norm() <= pen.norm() / 3.0 && alt.norm() <= pen.norm(),
          fmt("|bias| NNpen %.4f, POST(2) %.4f, ALT(3) %.4f (slope %.4f, "
              "%.4f, %.4f)",
              pen.norm(), post.norm(), alt.norm(), std::abs(pen(1)),
              std::abs(post(1)), std::abs(alt(1)))};
}

Verdict single_index_reduction() {
  auto rng = rng_for(112);
  double fit_gap = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int K = 1 + i % 2;
    const PanelData d =
        random_panel(rng, 10 + i % 5, 8 + i % 4, VectorXd::Constant(K, 0.7), 1,
                     0.5);
    const double psi = uniform(rng, 0.1, 1.0);
    LossSpec s;
    s.kind = LossKind::weighted_ls;
    s.weights = MatrixXd::Ones(d.N(), d.T());
    const VectorXd a = fit_single_index(d, s, psi).beta;
    const VectorXd b = fit_nn_penalized(d, psi).beta;
    fit_gap = std::max(fit_gap, (a - b).norm());
  }
  LossSpec probit;
  probit.kind = LossKind::probit;
  double fd_gap = 0.0;
  const double h = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const double y = i % 2;
    const double z = uniform(rng, -10.0, 10.0);
    const double fd = (loss_value_grad(probit, y, z + h).value -
                       loss_value_grad(probit, y, z - h).value) /
                      (2.0 * h);
    const double exact = loss_value_grad(probit, y, z).derivative;
    fd_gap = std::max(fd_gap, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
  }
  return {fit_gap <= 1e-6 && fd_gap <= 1e-6,
          fmt("max |beta_wls - beta_pen| %.2e over 20; max probit FD gap %.2e "
              "over 1000",
              fit_gap, fd_gap)};
}

bool monotone_schedule(const RscReport& r) {
  for (std::size_t q = 1; q < r.q_schedule.size(); ++q) {
    if (r.q_schedule[q].a > r.q_schedule[q - 1].a) return false;
    if (r.q_schedule[q].b < r.q_schedule[q - 1].b) return false;
  }
  return true;
}

Verdict rsc_schedule() {
  int positive = 0;
  bool monotone = true;
  double smallest = std::numeric_limits<double>::infinity();
  for (int seed = 1; seed <= 100; ++seed) {
    auto rng = rng_for(1300 + seed);
    const MatrixXd X = gaussian(rng, 200, 200);
    const MatrixXd l = gaussian(rng, 200, 2), f = gaussian(rng, 200, 2);
    const RscReport r = rsc_lower_bound(X, l, f);
    monotone = monotone && monotone_schedule(r);
    if (r.mu_bound > 0.0) ++positive;
    smallest = std::min(smallest, r.mu_bound);
  }
  // Structured inputs: low-rank regressors and regressors inside the spans.
  auto rng = rng_for(1299);
  for (int i = 0; i < 20; ++i) {
    const MatrixXd l = gaussian(rng, 30, 1 + i % 3), f = gaussian(rng, 25, 1 + i % 3);
    const MatrixXd X = i % 2 ? MatrixXd(gaussian(rng, 30, 1 + i % 4) *
                                        gaussian(rng, 25, 1 + i % 4).transpose())
                             : MatrixXd(l * gaussian(rng, 25, l.cols()).transpose() +
                                        gaussian(rng, 30, 25, 0.1));
    monotone = monotone && monotone_schedule(rsc_lower_bound(X, l, f));
  }
  return {monotone && positive >= 95,
          fmt("schedules monotone: %s; mu_bound > 0 in %d of 100 (min %.3e)",
              monotone ? "yes" : "no", positive, smallest)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> check;
};

}  // namespace

int main() {
  MonteCarlo mc;
  bool mc_ready = false;
  double mc_seconds = 0.0;
  auto with_mc = [&](Verdict (*f)(const MonteCarlo&)) {
    return [&, f] {
      if (!mc_ready) {
        const auto start = std::chrono::steady_clock::now();
        mc = run_monte_carlo();
        mc_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
        mc_ready = true;
        std::printf("# Monte Carlo: %.1f s, failures %d (N=100) / %d (N=50)\n",
                    mc_seconds, mc.large.failures, mc.small.failures);
      }
      return f(mc);
    };
  };

  const std::vector<Criterion> criteria = {
      {1, "prox-oracle equivalence", 1, prox_oracle},
      {2, "profile equals joint minimization", 5, dual_route},
      {3, "g-function inequalities", 5, g_inequalities},
      {4, "convexity chords", 10, convexity_chords},
      {5, "non-convex landscape", 120, landscape_scan},
      {6, "psi -> 0 limit", 60, psi_limit},
      {7, "pooled OLS degeneracy", 60, pooled_degeneracy},
      {8, "rate shape", 900, with_mc(rate_shape)},
      {9, "post-iteration equivalence", 900, with_mc(post_equivalence)},
      {10, "rank recovery", 900, with_mc(rank_recovery)},
      {11, "bias ordering", 900, with_mc(bias_ordering)},
      {12, "single-index reduction", 60, single_index_reduction},
      {13, "RSC schedule", 60, rsc_schedule},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (c.id >= 8 && c.id <= 11) seconds = std::max(seconds, mc_seconds);
    if (seconds > c.budget_seconds) {
      v.pass = false;
      v.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    if (!v.pass) ++failed;
    std::printf("%s %2d %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", c.id,
                c.name, v.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
