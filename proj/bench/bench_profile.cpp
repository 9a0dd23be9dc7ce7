// Threshold-profile kernels: serial reference against the chunked sweep.

#include "mutare/likelihood.hpp"
#include "mutare/montecarlo.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

namespace {

struct Setup {
  mutare::LaggedDesign design;
  std::vector<double> candidates;
};

Setup make_setup(int n) {
  const auto panel = mutare::simulate_panel(mutare::example1_params(), n, 60, 200, 7);
  return {mutare::LaggedDesign(panel, 2), mutare::candidate_thresholds(panel, mutare::kDefaultTrim)};
}

void BM_ProfileReference(benchmark::State& state) {
  const auto s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        mutare::profile_tau_reference(s.design, s.candidates, mutare::full_support(2), {}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(s.candidates.size()));
}

void BM_ProfileSweep(benchmark::State& state) {
  const auto s = make_setup(static_cast<int>(state.range(0)));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(mutare::profile_tau(s.design, s.candidates, mutare::full_support(2), {}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(s.candidates.size()));
}

}  // namespace

BENCHMARK(BM_ProfileReference)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfileSweep)
    ->ArgsProduct({{25, 100}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
