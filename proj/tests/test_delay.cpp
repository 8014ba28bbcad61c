#include <cmath>

#include "doctest.h"
#include "edgeorch/delay.hpp"
#include "edgeorch/errors.hpp"
#include "oracles.hpp"

using namespace edgeorch;
using test::server;
using test::service;

TEST_CASE("M/M/1 sojourn is 1/(mu - lambda)") {
  for (double mu : {1.0, 3.5, 10.0})
    for (double frac : {0.0, 0.1, 0.5, 0.9, 0.99})
      CHECK(mmc_sojourn(frac * mu, mu, 1) == doctest::Approx(1.0 / (mu - frac * mu)).epsilon(1e-12));
}

TEST_CASE("Erlang-C reference values") {
  CHECK(mmc_sojourn(1.5, 1.0, 2) == doctest::Approx(16.0 / 7.0).epsilon(1e-12));
  // c=3, a=2: P_wait = 4/9, W_q = P_wait / (c mu - lambda) = 4/9.
  CHECK(mmc_sojourn(2.0, 1.0, 3) == doctest::Approx(1.0 + 4.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("M/M/c matches the birth-death chain") {
  for (int c : {1, 2, 3, 5, 8})
    for (double rho : {0.05, 0.3, 0.7, 0.95}) {
      const double mu = 2.5, lambda = rho * c * mu;
      CHECK(mmc_sojourn(lambda, mu, c) == doctest::Approx(test::birth_death_sojourn(lambda, mu, c)).epsilon(1e-9));
    }
}

TEST_CASE("M/M/c edge cases") {
  CHECK(mmc_sojourn(0.0, 4.0, 3) == 0.25);
  CHECK_THROWS_AS(mmc_sojourn(2.0, 1.0, 2), UnstableQueueError);
  CHECK_THROWS_AS(mmc_sojourn(1.0, 0.0, 2), ContractViolation);
  CHECK_THROWS_AS(mmc_sojourn(1.0, 1.0, 0), ContractViolation);
  // More servers never hurt.
  CHECK(mmc_sojourn(1.8, 1.0, 3) < mmc_sojourn(1.8, 1.0, 2));
}

TEST_CASE("transfer time in seconds for MB over Gbps") {
  CHECK(transfer_time(100.0, 1.0) == doctest::Approx(0.8));
  CHECK(transfer_time(10.0, 4.0) == doctest::Approx(0.02));
}

namespace {

// Line a - b - c; service 0 on a and b, service 1 on c.
Scenario line_scenario() {
  Scenario sc;
  sc.name = "line";
  sc.topology = NetworkTopology({server("a", ServerKind::ucs, 8, 0, 100, 2.0), server("b", ServerKind::ucs, 8, 0, 100, 2.0),
                                 server("c", ServerKind::ucs, 8, 0, 100, 2.0)});
  sc.topology.add_link(0, 1, 1.0);
  sc.topology.add_link(1, 2, 2.0);
  sc.services = {service("s0", ServiceKind::micro, 1, 0, 10, 50, 10), service("s1", ServiceKind::micro, 1, 0, 10, 100, 8)};
  sc.requests = {test::request("r", {0, 1}, 1, 3.0)};
  return sc;
}

}  // namespace

TEST_CASE("proportional routing follows adjacent instance counts") {
  auto sc = line_scenario();
  DeploymentPlan plan(3, 2);
  plan.add(0, 0, 1);
  plan.add(1, 0, 3);
  plan.add(2, 1, 1);
  const auto routing = proportional_routing(plan, sc.topology, sc.requests);
  CHECK(routing.entry(0, 0) == doctest::Approx(0.25));
  CHECK(routing.entry(0, 1) == doctest::Approx(0.75));
  // Server a cannot reach c: the mass routed there strands stage 1.
  CHECK_FALSE(routing.all_routable());
  CHECK(routing.request(0).unreachable_stage == std::optional<std::size_t>(1));

  plan.add(1, 1, 1);
  const auto fixed = proportional_routing(plan, sc.topology, sc.requests);
  CHECK(fixed.all_routable());
  CHECK(fixed.hop(0, 0, 0, 1) == doctest::Approx(1.0));
  CHECK(fixed.hop(0, 0, 1, 1) == doctest::Approx(0.5));
  CHECK(fixed.hop(0, 0, 1, 2) == doctest::Approx(0.5));
}

TEST_CASE("hand-computed request delay") {
  auto sc = line_scenario();
  DeploymentPlan plan(3, 2);
  plan.add(1, 0, 1);
  plan.add(2, 1, 1);
  const auto eval = evaluate_plan(sc, plan);
  REQUIRE(eval.feasible);
  const auto& d = std::get<DelayBreakdown>(eval.requests[0]);
  CHECK(d.transmit == doctest::Approx(10.0 * 8 / 2000.0));
  CHECK(d.return_ == doctest::Approx(10.0 * 8 / 2000.0));
  CHECK(d.queue_process == doctest::Approx(1.0 / (10 - 3) + 1.0 / (8 - 3)));
  CHECK(d.communicate == doctest::Approx(50.0 * 8 / 2000.0));
  CHECK(eval.total == doctest::Approx(d.transmit + d.return_ + d.queue_process + d.communicate));
  CHECK(eval.arrivals.at(1, 0) == doctest::Approx(3.0));
  CHECK(eval.arrivals.at(2, 1) == doctest::Approx(3.0));
}

TEST_CASE("infeasible requests carry the penalty") {
  auto sc = line_scenario();
  sc.settings.t_penalty = 1000.0;
  DeploymentPlan empty(3, 2);
  auto eval = evaluate_plan(sc, empty);
  CHECK_FALSE(eval.feasible);
  CHECK(eval.total == 1000.0);
  CHECK(std::get<InfeasibleDelay>(eval.requests[0]).reason == InfeasibleReason::unreachable_stage);
  CHECK(evaluate_plan(sc, empty, 5.0).total == 5.0);

  DeploymentPlan slow(3, 2);
  slow.add(1, 0, 1);
  slow.add(2, 1, 1);
  sc.requests[0].arrival_rate = 9.0;  // above mu of s1
  eval = evaluate_plan(sc, slow);
  CHECK(std::get<InfeasibleDelay>(eval.requests[0]).reason == InfeasibleReason::unstable_queue);
  CHECK_THROWS_AS(require_routable(proportional_routing(empty, sc.topology, sc.requests), sc.requests),
                  UnreachableStageError);
}

TEST_CASE("traffic equations conserve probability mass") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sc = test::random_small_scenario(rng, 4, 3, 3, 3);
    const auto plan = test::random_plan(rng, sc);
    const auto routing = proportional_routing(plan, sc.topology, sc.requests);
    const auto arrivals = propagate_arrivals(plan, routing, sc.requests);
    double injected = 0.0, absorbed = 0.0;
    for (std::size_t r = 0; r < sc.requests.size(); ++r) {
      if (!routing.request(r).routable()) continue;
      injected += sc.requests[r].arrival_rate * double(sc.requests[r].chain.size());
    }
    for (std::size_t r = 0; r < sc.requests.size(); ++r) {
      if (!routing.request(r).routable()) continue;
      for (std::size_t k = 0; k < sc.requests[r].chain.size(); ++k)
        for (std::size_t n = 0; n < sc.topology.size(); ++n)
          absorbed += sc.requests[r].arrival_rate * arrivals.visits[r][k][n];
    }
    CHECK(absorbed == doctest::Approx(injected).epsilon(1e-12));
  }
}

TEST_CASE("dynamic-programming delay equals the path product form") {
  Rng rng(11);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto sc = test::random_small_scenario(rng, 4, 4, 4, 4);
    const auto plan = test::random_plan(rng, sc);
    const auto eval = evaluate_plan(sc, plan);
    for (std::size_t r = 0; r < sc.requests.size(); ++r) {
      if (!is_feasible(eval.requests[r])) continue;
      const double oracle = test::path_form_delay(sc, r, plan, eval.routing, eval.arrivals);
      CHECK(delay_value(eval.requests[r]) == doctest::Approx(oracle).epsilon(1e-12));
      ++compared;
    }
  }
  CHECK(compared > 50);
}

TEST_CASE("path enumeration probabilities sum to one") {
  Rng rng(5);
  const auto sc = test::random_small_scenario(rng, 5, 4, 3, 4);
  auto plan = test::random_plan(rng, sc);
  const auto routing = proportional_routing(plan, sc.topology, sc.requests);
  for (std::size_t r = 0; r < sc.requests.size(); ++r) {
    if (!routing.request(r).routable()) continue;
    double mass = 0.0;
    for (const auto& p : enumerate_paths(sc.requests[r], r, routing)) mass += p.probability;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(enumerate_paths(sc.requests[0], 0, routing, 0), ContractViolation);
}

TEST_CASE("utilization flags overloaded groups") {
  auto sc = line_scenario();
  DeploymentPlan plan(3, 2);
  plan.add(1, 0, 1);
  plan.add(2, 1, 1);
  sc.requests[0].arrival_rate = 8.5;
  const auto routing = proportional_routing(plan, sc.topology, sc.requests);
  const auto u = utilization(propagate_arrivals(plan, routing, sc.requests), plan, sc.services);
  CHECK_FALSE(u.stable);
  CHECK(u.at(1, 0) == doctest::Approx(0.85));
  CHECK(u.at(2, 1) == doctest::Approx(8.5 / 8.0));
}
