#pragma once

// Reference placement solvers scored by the same delay model as the learner:
// uniform random placement, a greedy service-aggregation heuristic and a
// genetic search with hill climbing. All of them place exactly the instance
// budget the environment uses.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "edgeorch/model.hpp"

namespace edgeorch {

// Throws InfeasibleError when every restart hits a server-less slot.
DeploymentPlan random_place(const Scenario& scenario, std::uint64_t seed, std::size_t max_restarts = 100);

// Requests in decreasing arrival rate; each budgeted instance goes to the
// feasible server with the lowest resulting total delay. Ties prefer the
// server of the chain predecessor (the entry server for the first stage),
// then the lowest index.
DeploymentPlan greedy_aggregate(const Scenario& scenario);

struct GaConfig {
  std::size_t population = 40;
  std::size_t generations = 60;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  std::size_t local_search_steps = 20;
  std::size_t tournament = 3;
  std::size_t elites = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

using Chromosome = std::vector<ServerIndex>;  // one server per budgeted instance

struct GaResult {
  DeploymentPlan plan;
  double total_delay = 0.0;
  Chromosome best;
  std::vector<double> best_fitness;  // best-ever fitness after each generation, index 0 = initial
  std::size_t evaluations = 0;
};

// Service of every gene, in the environment's placement order.
std::vector<ServiceIndex> placement_slots(const Scenario& scenario);
DeploymentPlan decode(const Scenario& scenario, const std::vector<ServiceIndex>& slots, const Chromosome& genes);

// Fitness 1 / total_delay. `initial` seeds the population; missing members
// are drawn at random. Throws InfeasibleError if no resource-feasible
// individual is ever seen.
GaResult genetic_search(const Scenario& scenario, const GaConfig& cfg,
                        const std::vector<Chromosome>& initial = {});

}  // namespace edgeorch
