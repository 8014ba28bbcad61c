#include <cmath>

#include "doctest.h"
#include "edgeorch/env.hpp"
#include "edgeorch/errors.hpp"
#include "edgeorch/generator.hpp"
#include "oracles.hpp"

using namespace edgeorch;
using test::server;
using test::service;

namespace {

Scenario small() {
  Scenario sc;
  sc.name = "small";
  sc.topology = test::mesh({server("a", ServerKind::ucs, 6, 0, 80, 2.0), server("b", ServerKind::ucs, 6, 0, 80, 2.5),
                            server("h", ServerKind::hac, 8, 2, 160, 5.0)},
                           3.0);
  sc.services = {service("m0", ServiceKind::micro, 1, 0, 13, 100, 8), service("m1", ServiceKind::micro, 1, 0, 13, 100, 9),
                 service("ai", ServiceKind::ai, 3, 1, 65, 300, 20), service("unused", ServiceKind::micro, 1, 0, 13, 100, 8)};
  sc.requests = {test::request("r0", {1, 0}, 0, 3.0), test::request("r1", {2, 1}, 1, 4.0)};
  sc.settings.rho_target = 0.7;
  return sc;
}

// Index of the first available server.
ServerIndex first_fit(const EnvState& s) {
  for (std::size_t n = 0; n < s.avail_mask.size(); ++n)
    if (s.avail_mask[n]) return n;
  return 0;
}

}  // namespace

TEST_CASE("instance budget from demand and target utilisation") {
  const auto sc = small();
  // m0: 3/(0.7*8) -> 1; m1: 7/(0.7*9) -> 2; ai: 4/(0.7*20) -> 1; unused -> 0.
  CHECK(instance_budget(sc) == std::vector<int>{1, 2, 1, 0});
  auto exact = small();
  exact.services[0].proc_rate = 3.0 / (0.7 * 2.0);  // demand exactly two instances
  CHECK(instance_budget(exact)[0] == 2);
}

TEST_CASE("schedule follows first appearance along chains") {
  const auto sc = small();
  const auto sched = build_schedule(sc, instance_budget(sc));
  CHECK(sched.slots == std::vector<ServiceIndex>{1, 1, 0, 2});
  CHECK(sched.total() == 4);
  CHECK_FALSE(sched.finished());
}

TEST_CASE("budget that cannot fit is a setup error") {
  auto sc = small();
  sc.requests[1].arrival_rate = 200.0;  // needs 15 AI instances, two GPUs exist
  CHECK_THROWS_AS(check_budget_capacity(sc, instance_budget(sc)), SetupError);
}

TEST_CASE("state shapes and contents") {
  OrchestrationEnv env(small());
  const auto& s = env.reset();
  CHECK(s.servers() == 3);
  CHECK(s.pending_service == 1);
  CHECK(s.cursor == 0);
  CHECK(s.total_steps == 4);
  CHECK(s.deploy_graph.nodes == 3);
  CHECK(s.deploy_graph.feature_dim == 4);
  CHECK(s.invoke_graph.nodes == 4);
  CHECK(s.invoke_graph.feature_dim == kInvokeFeatureDim);
  CHECK(s.route_graphs.size() == 2);  // both requests use m1
  CHECK(s.arrival_dist.size() == 3);
  for (const auto& g : s.route_graphs)
    for (std::size_t n = 0; n < g.nodes; ++n) {
      bool self = false;
      for (auto [a, b] : g.edges) self = self || (a == n && b == n);
      CHECK(self);
    }
}

TEST_CASE("AI slots are masked off UCS servers") {
  OrchestrationEnv env(small());
  env.reset();
  for (int i = 0; i < 3; ++i) env.step(first_fit(env.state()));
  CHECK(env.state().pending_service == 2);
  CHECK(env.state().avail_mask == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(action_mask(env.state()) == env.state().avail_mask);
  CHECK_THROWS_AS(env.step(0), ContractViolation);
  EnvState blocked = env.state();
  blocked.avail_mask.assign(3, 0);
  CHECK_THROWS_AS(action_mask(blocked), DeadlockError);
  env.step(2);
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(2), ContractViolation);
}

TEST_CASE("intermediate rewards telescope to the total improvement") {
  RewardConfig rc;
  rc.scaling_bonus = 0.0;
  rc.alpha1 = 1.0;
  OrchestrationEnv env(small(), rc);
  Rng rng(3);
  for (int episode = 0; episode < 10; ++episode) {
    env.reset();
    double sum = 0.0;
    while (!env.done()) {
      std::vector<ServerIndex> legal;
      for (std::size_t n = 0; n < env.state().avail_mask.size(); ++n)
        if (env.state().avail_mask[n]) legal.push_back(n);
      sum += env.step(legal[rng.index(legal.size())]).intermediate;
    }
    CHECK(sum == doctest::Approx(env.initial_total() - env.current_total()).epsilon(1e-12));
  }
}

TEST_CASE("settlement compares to the previous round and the best") {
  OrchestrationEnv env(small());
  auto run = [&](std::vector<ServerIndex> actions) {
    env.reset();
    StepResult last;
    for (auto a : actions) last = env.step(a);
    return last;
  };
  const auto first = run({0, 1, 0, 2});
  CHECK(first.done);
  CHECK(first.settlement == 0.0);
  const double t1 = env.current_total();
  CHECK(env.best_total() == t1);

  const auto second = run({2, 2, 2, 2});
  const double t2 = env.current_total();
  CHECK(second.settlement == doctest::Approx((t1 - t2) + (t1 - std::min(t1, t2))));
  CHECK(env.previous_round_total() == t2);
  CHECK(env.best_total() == std::min(t1, t2));
  CHECK(second.reward == doctest::Approx(second.intermediate + second.settlement));

  env.reset_history();
  CHECK_FALSE(env.best_total().has_value());
}

TEST_CASE("unchanged delay earns the scaling bonus") {
  RewardConfig rc;
  rc.scaling_bonus = 0.25;
  rc.t_penalty = 50.0;
  OrchestrationEnv env(small(), rc);
  env.reset();
  CHECK(env.penalty() == 50.0);
  CHECK(env.initial_total() == 100.0);
  // First m1 placement leaves both requests unroutable: total unchanged.
  CHECK(env.step(0).intermediate == 0.25);
}

TEST_CASE("generated paper scenario fits its budget") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sc = generate_scenario(GeneratorParams{}, seed);
    OrchestrationEnv env(sc);
    CHECK_NOTHROW(env.reset());
    CHECK(env.total_steps() > 0);
  }
  RewardConfig zero;
  zero.alpha1 = 0.0;
  CHECK_THROWS_AS(OrchestrationEnv(small(), zero), ConfigError);
}
