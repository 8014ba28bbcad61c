#include <benchmark/benchmark.h>

#include "edgeorch/env.hpp"
#include "edgeorch/generator.hpp"
#include "edgeorch/policy.hpp"

using namespace edgeorch;

static void BM_ActorForward(benchmark::State& state) {
  const auto sc = generate_scenario(state.range(0) ? paper_preset() : desk_preset(), 1);
  OrchestrationEnv env(sc);
  const auto input = nn::prepare(env.reset());
  nn::ActorNet actor(nn::ArchConfig::for_services(sc.services.size()));
  for (auto _ : state) benchmark::DoNotOptimize(actor.probabilities(input));
  state.SetLabel(state.range(0) ? "paper" : "desk");
}
BENCHMARK(BM_ActorForward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_ActorBackward(benchmark::State& state) {
  const auto sc = generate_scenario(desk_preset(), 1);
  OrchestrationEnv env(sc);
  const auto input = nn::prepare(env.reset());
  nn::ActorNet actor(nn::ArchConfig::for_services(sc.services.size()));
  for (auto _ : state) {
    nn::Tape tape;
    tape.backward(nn::sum(actor.log_probs(tape, input)));
  }
}
BENCHMARK(BM_ActorBackward)->Unit(benchmark::kMicrosecond);

static void BM_EnvStep(benchmark::State& state) {
  const auto sc = generate_scenario(desk_preset(), 1);
  OrchestrationEnv env(sc);
  env.reset();
  for (auto _ : state) {
    if (env.done()) env.reset();
    ServerIndex a = 0;
    while (!env.state().avail_mask[a]) ++a;
    benchmark::DoNotOptimize(env.step(a).reward);
  }
}
BENCHMARK(BM_EnvStep)->Unit(benchmark::kMicrosecond);
