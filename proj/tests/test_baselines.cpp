#include "doctest.h"
#include "edgeorch/baselines.hpp"
#include "edgeorch/delay.hpp"
#include "edgeorch/env.hpp"
#include "edgeorch/errors.hpp"
#include "edgeorch/generator.hpp"
#include "oracles.hpp"

using namespace edgeorch;
using test::server;
using test::service;

namespace {

// Small enough to enumerate: 3 servers, 6 budgeted instances, 729 placements.
Scenario tiny() {
  Scenario sc;
  sc.name = "tiny";
  sc.topology = NetworkTopology({server("a", ServerKind::ucs, 3, 0, 60, 2.0), server("b", ServerKind::ucs, 3, 0, 60, 3.0),
                                 server("c", ServerKind::ucs, 4, 0, 60, 1.0)});
  sc.topology.add_link(0, 1, 2.0);
  sc.topology.add_link(1, 2, 4.0);
  sc.services = {service("x", ServiceKind::micro, 1, 0, 13, 100, 8), service("y", ServiceKind::micro, 1, 0, 13, 60, 9),
                 service("z", ServiceKind::micro, 1, 0, 13, 150, 7)};
  sc.requests = {test::request("p", {0, 1, 2}, 0, 4.0), test::request("q", {2, 0}, 2, 3.0),
                 test::request("r", {1}, 1, 5.0)};
  return sc;
}

}  // namespace

TEST_CASE("placement slots match the environment schedule") {
  const auto sc = tiny();
  CHECK(placement_slots(sc) == build_schedule(sc, instance_budget(sc)).slots);
  const auto slots = placement_slots(sc);
  const auto plan = decode(sc, slots, Chromosome(slots.size(), 1));
  CHECK(plan.total() == int(slots.size()));
  CHECK(plan.row(1) == instance_budget(sc));
}

TEST_CASE("genetic search reaches the exhaustive optimum") {
  const auto sc = tiny();
  const auto oracle = test::exhaustive_optimum(sc);
  REQUIRE(oracle.feasible > 0);
  GaConfig cfg;
  cfg.population = 30;
  cfg.generations = 40;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    cfg.seed = seed;
    const auto res = genetic_search(sc, cfg);
    CHECK(res.total_delay == doctest::Approx(oracle.best).epsilon(1e-9));
    CHECK(res.total_delay == doctest::Approx(evaluate_plan(sc, res.plan).total));
    CHECK(validate_plan(res.plan, sc.topology, sc.services).feasible);
    CHECK(res.best_fitness.size() == cfg.generations + 1);
    for (std::size_t g = 1; g < res.best_fitness.size(); ++g) CHECK(res.best_fitness[g] >= res.best_fitness[g - 1]);
  }
}

TEST_CASE("baselines never beat the exhaustive optimum") {
  const auto sc = tiny();
  const auto oracle = test::exhaustive_optimum(sc);
  const auto greedy = greedy_aggregate(sc);
  CHECK(validate_plan(greedy, sc.topology, sc.services).feasible);
  CHECK(evaluate_plan(sc, greedy).total >= oracle.best - 1e-12);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto plan = random_place(sc, seed);
    CHECK(validate_plan(plan, sc.topology, sc.services).feasible);
    CHECK(plan.row(0).size() == 3);
    CHECK(evaluate_plan(sc, plan).total >= oracle.best - 1e-12);
  }
}

TEST_CASE("baselines are deterministic") {
  const auto sc = generate_scenario(desk_preset(), 3);
  CHECK(greedy_aggregate(sc) == greedy_aggregate(sc));
  CHECK(random_place(sc, 4) == random_place(sc, 4));
  GaConfig cfg;
  cfg.population = 10;
  cfg.generations = 5;
  cfg.local_search_steps = 2;
  const auto a = genetic_search(sc, cfg), b = genetic_search(sc, cfg);
  CHECK(a.best == b.best);
  CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("seeded population is kept by elitism") {
  const auto sc = tiny();
  const auto slots = placement_slots(sc);
  GaConfig cfg;
  cfg.population = 6;
  cfg.generations = 1;
  cfg.local_search_steps = 0;
  const auto greedy = greedy_aggregate(sc);
  // Greedy plan as a chromosome: each slot takes the next unused server.
  DeploymentPlan left = greedy;
  Chromosome seed_genes;
  for (auto s : slots)
    for (ServerIndex n = 0; n < sc.topology.size(); ++n)
      if (left.count(n, s) > 0) {
        left.set(n, s, left.count(n, s) - 1);
        seed_genes.push_back(n);
        break;
      }
  REQUIRE(seed_genes.size() == slots.size());
  const auto res = genetic_search(sc, cfg, {seed_genes});
  CHECK(res.total_delay <= evaluate_plan(sc, greedy).total + 1e-12);
}

TEST_CASE("invalid GA configuration") {
  GaConfig cfg;
  cfg.population = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GaConfig{};
  cfg.mutation_rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("greedy keeps room for the rest of the budget") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    CAPTURE(seed);
    const auto sc = generate_scenario(desk_preset(), seed);
    DeploymentPlan plan;
    REQUIRE_NOTHROW(plan = greedy_aggregate(sc));
    CHECK(validate_plan(plan, sc.topology, sc.services).feasible);
    std::vector<int> totals;
    for (std::size_t s = 0; s < sc.services.size(); ++s) totals.push_back(plan.service_total(s));
    CHECK(totals == instance_budget(sc));
  }
}

TEST_CASE("greedy beats the random mean on seeded scenarios") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sc = generate_scenario(desk_preset(), seed);
    double mean = 0.0;
    for (std::uint64_t i = 1; i <= 100; ++i) mean += evaluate_plan(sc, random_place(sc, i)).total;
    CHECK(evaluate_plan(sc, greedy_aggregate(sc)).total <= mean / 100.0);
  }
}
