#include <benchmark/benchmark.h>

#include "edgeorch/baselines.hpp"
#include "edgeorch/delay.hpp"
#include "edgeorch/generator.hpp"

using namespace edgeorch;

static void BM_MmcSojourn(benchmark::State& state) {
  const int c = int(state.range(0));
  double lambda = 0.5 * c;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmc_sojourn(lambda, 1.0, c));
    lambda = lambda < 0.9 * c ? lambda + 1e-6 : 0.5 * c;
  }
}
BENCHMARK(BM_MmcSojourn)->Arg(1)->Arg(4)->Arg(16)->Arg(64);

static void BM_EvaluatePlan(benchmark::State& state) {
  const auto sc = generate_scenario(state.range(0) ? paper_preset() : desk_preset(), 1);
  const auto plan = greedy_aggregate(sc);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_plan(sc, plan).total);
  state.SetLabel(state.range(0) ? "paper" : "desk");
}
BENCHMARK(BM_EvaluatePlan)->Arg(0)->Arg(1);

static void BM_GreedyAggregate(benchmark::State& state) {
  const auto sc = generate_scenario(desk_preset(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_aggregate(sc).total());
}
BENCHMARK(BM_GreedyAggregate);
BENCHMARK_MAIN();
