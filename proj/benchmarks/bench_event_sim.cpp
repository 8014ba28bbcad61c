#include <benchmark/benchmark.h>

#include "edgeorch/baselines.hpp"
#include "edgeorch/event_sim.hpp"
#include "edgeorch/generator.hpp"

using namespace edgeorch;

static void BM_Simulate(benchmark::State& state) {
  const auto sc = generate_scenario(desk_preset(), 1);
  const auto plan = greedy_aggregate(sc);
  const auto eval = evaluate_plan(sc, plan);
  SimConfig cfg;
  cfg.horizon = std::uint64_t(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(sc, plan, eval.routing, cfg).overall_mean);
  state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
