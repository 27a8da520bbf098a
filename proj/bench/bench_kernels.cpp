// Serial vs parallel replica kernels. Arg 0 is the serial path, arg 1 the OpenMP path.

#include <benchmark/benchmark.h>

#include "kbrw/charfn.hpp"
#include "kbrw/kernels.hpp"
#include "kbrw/kinetic.hpp"
#include "kbrw/martingale.hpp"
#include "kbrw/stationary.hpp"

using namespace kbrw;

namespace {

Exec mode(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void BM_estimate_m(benchmark::State& state) {
  const auto model = independent_uniform_kernel(1.5).monte_carlo_only();
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_m(model, 1.5, 1 << 20, Key{1}, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * (1 << 20));
}

void BM_solve_time(benchmark::State& state) {
  const auto model = independent_uniform_kernel(1.0);
  const auto grid = default_grid();
  const auto phi = gaussian_cf(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_time(phi, model, 1.0, grid, 2000, 100000, Key{2}, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * 2000);
}

void BM_sample_W(benchmark::State& state) {
  const auto model = independent_uniform_kernel(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_W_infinity_many(model, 1.0, 10, 2000, Key{3}, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * 2000);
}

}  // namespace

BENCHMARK(BM_estimate_m)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_solve_time)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sample_W)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
