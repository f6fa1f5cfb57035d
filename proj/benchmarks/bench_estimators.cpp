#include <benchmark/benchmark.h>

#include "nnpanel/diagnostics.hpp"
#include "nnpanel/estimators.hpp"
#include "nnpanel/simulation.hpp"
#include "nnpanel/tuning.hpp"

namespace {

using namespace nnpanel;

PanelData mc_panel(Eigen::Index n) {
  DgpSpec spec;
  spec.N = n;
  spec.T = n;
  spec.seed = 7;
  return generate(spec).data;
}

void BM_Svd(benchmark::State& state) {
  const PanelData d = mc_panel(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(svd(d.Y));
}
BENCHMARK(BM_Svd)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_PenalizedProfile(benchmark::State& state) {
  const PanelData d = mc_panel(state.range(0));
  const VectorXd beta = VectorXd::Ones(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(penalized_profile(d, beta, 0.5).value);
  }
}
BENCHMARK(BM_PenalizedProfile)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_NnMin(benchmark::State& state) {
  const PanelData d = mc_panel(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_nn_min(d).beta);
}
BENCHMARK(BM_NnMin)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_NnPenalized(benchmark::State& state) {
  const PanelData d = mc_panel(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_nn_penalized(d, 0.5).beta);
}
BENCHMARK(BM_NnPenalized)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_SelectPsi(benchmark::State& state) {
  const PanelData d = mc_panel(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(select_psi(d).psi_hat);
}
BENCHMARK(BM_SelectPsi)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_PostIterate(benchmark::State& state) {
  const PanelData d = mc_panel(state.range(0));
  const VectorXd start = VectorXd::Ones(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(post_iterate(d, 2, start, 3).beta);
  }
}
BENCHMARK(BM_PostIterate)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ObjectiveScan(benchmark::State& state) {
  DgpSpec spec;
  spec.kind = DgpKind::nonconvex_demo;
  spec.N = spec.T = state.range(0);
  const PanelData d = generate(spec).data;
  const std::vector<VectorXd> grid = scalar_grid(-1.0, 5.0, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective_scan(d, grid, 2, 0.3).ls.size());
  }
}
BENCHMARK(BM_ObjectiveScan)->Arg(60)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
