#include "edgeorch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "edgeorch/delay.hpp"
#include "edgeorch/env.hpp"
#include "edgeorch/errors.hpp"
#include "edgeorch/random.hpp"

namespace edgeorch {

namespace {

std::vector<ServerIndex> feasible_servers(const DeploymentPlan& plan, const Scenario& sc, ServiceIndex s) {
  const auto mask = availability_mask(plan, sc.topology, sc.services, s);
  std::vector<ServerIndex> out;
  for (std::size_t n = 0; n < mask.size(); ++n)
    if (mask[n]) out.push_back(n);
  return out;
}

// First-fit of the still unplaced instances, GPU services and larger
// memory demands first. A cheap check that a partial plan is not a dead end.
bool rest_fits(DeploymentPlan plan, const Scenario& sc, const std::vector<int>& remaining) {
  std::vector<ServiceIndex> order;
  for (std::size_t s = 0; s < remaining.size(); ++s)
    if (remaining[s] > 0) order.push_back(s);
  std::stable_sort(order.begin(), order.end(), [&](ServiceIndex a, ServiceIndex b) {
    const auto &x = sc.services[a], &y = sc.services[b];
    if (x.gpu_req != y.gpu_req) return x.gpu_req > y.gpu_req;
    return x.mem_req_gb > y.mem_req_gb;
  });
  for (auto s : order)
    for (int k = 0; k < remaining[s]; ++k) {
      const auto options = feasible_servers(plan, sc, s);
      if (options.empty()) return false;
      plan.add(options.front(), s);
    }
  return true;
}

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

}  // namespace

std::vector<ServiceIndex> placement_slots(const Scenario& scenario) {
  return build_schedule(scenario, instance_budget(scenario)).slots;
}

DeploymentPlan decode(const Scenario& scenario, const std::vector<ServiceIndex>& slots, const Chromosome& genes) {
  if (genes.size() != slots.size()) throw ContractViolation("chromosome length does not match the budget");
  DeploymentPlan plan(scenario.topology.size(), scenario.services.size());
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (genes[i] >= scenario.topology.size()) throw ContractViolation("gene names a missing server");
    plan.add(genes[i], slots[i]);
  }
  return plan;
}

DeploymentPlan random_place(const Scenario& scenario, std::uint64_t seed, std::size_t max_restarts) {
  const auto slots = placement_slots(scenario);
  Rng rng(seed);
  for (std::size_t attempt = 0; attempt <= max_restarts; ++attempt) {
    DeploymentPlan plan(scenario.topology.size(), scenario.services.size());
    bool stuck = false;
    for (auto s : slots) {
      const auto options = feasible_servers(plan, scenario, s);
      if (options.empty()) {
        stuck = true;
        break;
      }
      plan.add(options[rng.index(options.size())], s);
    }
    if (!stuck) return plan;
  }
  throw InfeasibleError("random placement found no feasible plan");
}

DeploymentPlan greedy_aggregate(const Scenario& scenario) {
  auto remaining = instance_budget(scenario);
  std::vector<RequestIndex> order(scenario.requests.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](RequestIndex a, RequestIndex b) {
    return scenario.requests[a].arrival_rate > scenario.requests[b].arrival_rate;
  });

  DeploymentPlan plan(scenario.topology.size(), scenario.services.size());
  // Places one instance of s; `remaining` already excludes it.
  auto place = [&](ServiceIndex s, ServerIndex preferred) {
    auto options = feasible_servers(plan, scenario, s);
    if (options.empty()) throw InfeasibleError("greedy aggregation: no server can host service " + scenario.services[s].id);
    // Keep room for the rest of the budget when some option allows it.
    std::vector<ServerIndex> safe;
    for (auto n : options) {
      DeploymentPlan trial = plan;
      trial.add(n, s);
      if (rest_fits(trial, scenario, remaining)) safe.push_back(n);
    }
    if (!safe.empty()) options = std::move(safe);
    std::optional<ServerIndex> best;
    double best_total = std::numeric_limits<double>::infinity();
    for (auto n : options) {
      DeploymentPlan trial = plan;
      trial.add(n, s);
      const double total = evaluate_plan(scenario, trial).total;
      if (!best || (total < best_total && !nearly_equal(total, best_total))) {
        best = n;
        best_total = total;
      } else if (nearly_equal(total, best_total) && n == preferred && *best != preferred) {
        best = n;
      }
    }
    plan.add(*best, s);
    return *best;
  };

  for (auto r : order) {
    const auto& req = scenario.requests[r];
    ServerIndex predecessor = req.entry_server;
    for (auto s : req.chain) {
      ServerIndex last = predecessor;
      bool placed = false;
      while (remaining[s] > 0) {
        --remaining[s];
        last = place(s, placed ? last : predecessor);
        placed = true;
      }
      if (!placed) {
        // Already placed by an earlier chain; follow its heaviest location.
        int most = 0;
        for (std::size_t n = 0; n < plan.servers(); ++n) {
          if (plan.count(n, s) > most || (plan.count(n, s) == most && most > 0 && n == predecessor)) {
            most = plan.count(n, s);
            last = n;
          }
        }
      }
      predecessor = last;
    }
  }
  for (std::size_t s = 0; s < remaining.size(); ++s)
    while (remaining[s] > 0) {
      --remaining[s];
      place(s, 0);
    }
  return plan;
}

void GaConfig::validate() const {
  if (population < 2) throw ConfigError("GA population must be at least 2");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("crossover rate must lie in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation rate must lie in [0, 1]");
  if (tournament == 0) throw ConfigError("tournament size must be positive");
  if (elites > population) throw ConfigError("more elites than individuals");
}

namespace {

struct Individual {
  Chromosome genes;
  double total = 0.0;
  double fitness = 0.0;
  bool feasible = false;
};

class GaRun {
 public:
  GaRun(const Scenario& sc, const GaConfig& cfg)
      : sc_(sc), cfg_(cfg), slots_(placement_slots(sc)), rng_(cfg.seed) {}

  GaResult run(const std::vector<Chromosome>& initial);

 private:
  // Moves genes that overflow their server onto a random server that still
  // fits, in gene order. Returns false when some gene has nowhere to go.
  bool repair(Chromosome& genes) {
    DeploymentPlan plan(sc_.topology.size(), sc_.services.size());
    bool ok = true;
    for (std::size_t i = 0; i < genes.size(); ++i) {
      const auto mask = availability_mask(plan, sc_.topology, sc_.services, slots_[i]);
      if (!mask[genes[i]]) {
        bool fixed = false;
        for (int attempt = 0; attempt < 10 && !fixed; ++attempt) {
          const auto options = feasible_servers(plan, sc_, slots_[i]);
          if (options.empty()) break;
          genes[i] = options[rng_.index(options.size())];
          fixed = true;
        }
        ok = ok && fixed;
      }
      plan.add(genes[i], slots_[i]);
    }
    return ok;
  }

  Individual evaluate(Chromosome genes) {
    Individual ind;
    const bool repaired = repair(genes);
    ind.genes = std::move(genes);
    const auto plan = decode(sc_, slots_, ind.genes);
    const auto report = validate_plan(plan, sc_.topology, sc_.services);
    ind.feasible = repaired && report.feasible;
    ind.total = evaluate_plan(sc_, plan).total;
    if (!ind.feasible) ind.total += sc_.settings.t_penalty * double(report.violations.size() + 1);
    ind.fitness = 1.0 / ind.total;
    ++evaluations_;
    consider(ind);
    return ind;
  }

  void consider(const Individual& ind) {
    if (ind.feasible && (!best_ || ind.fitness > best_->fitness)) best_ = ind;
  }

  Chromosome random_genes() {
    Chromosome g(slots_.size());
    for (auto& x : g) x = rng_.index(sc_.topology.size());
    return g;
  }

  const Individual& tournament(const std::vector<Individual>& pop) {
    std::size_t pick = rng_.index(pop.size());
    for (std::size_t k = 1; k < cfg_.tournament; ++k) {
      const std::size_t other = rng_.index(pop.size());
      if (pop[other].fitness > pop[pick].fitness) pick = other;
    }
    return pop[pick];
  }

  Individual hill_climb(Individual ind) {
    if (ind.genes.empty() || sc_.topology.size() < 2) return ind;
    for (std::size_t step = 0; step < cfg_.local_search_steps; ++step) {
      Chromosome trial = ind.genes;
      const std::size_t i = rng_.index(trial.size());
      std::size_t n = rng_.index(sc_.topology.size() - 1);
      if (n >= trial[i]) ++n;
      trial[i] = n;
      Individual cand = evaluate(std::move(trial));
      if (cand.fitness > ind.fitness) ind = std::move(cand);
    }
    return ind;
  }

  const Scenario& sc_;
  GaConfig cfg_;
  std::vector<ServiceIndex> slots_;
  Rng rng_;
  std::optional<Individual> best_;
  std::size_t evaluations_ = 0;
};

GaResult GaRun::run(const std::vector<Chromosome>& initial) {
  std::vector<Individual> pop;
  for (const auto& g : initial) {
    if (pop.size() == cfg_.population) break;
    if (g.size() != slots_.size()) throw ConfigError("seed chromosome length does not match the budget");
    pop.push_back(evaluate(g));
  }
  while (pop.size() < cfg_.population) pop.push_back(evaluate(random_genes()));

  GaResult result;
  auto record = [&] { result.best_fitness.push_back(best_ ? best_->fitness : 0.0); };
  record();

  auto by_fitness = [](const Individual& a, const Individual& b) { return a.fitness > b.fitness; };
  for (std::size_t gen = 0; gen < cfg_.generations; ++gen) {
    std::stable_sort(pop.begin(), pop.end(), by_fitness);
    std::vector<Individual> next;
    for (std::size_t e = 0; e < cfg_.elites && e < pop.size(); ++e) next.push_back(hill_climb(pop[e]));
    while (next.size() < cfg_.population) {
      Chromosome a = tournament(pop).genes;
      Chromosome b = tournament(pop).genes;
      if (a.size() > 1 && rng_.uniform01() < cfg_.crossover_rate) {
        const std::size_t cut = 1 + rng_.index(a.size() - 1);
        std::swap_ranges(a.begin() + std::ptrdiff_t(cut), a.end(), b.begin() + std::ptrdiff_t(cut));
      }
      for (auto* child : {&a, &b}) {
        for (auto& gene : *child)
          if (rng_.uniform01() < cfg_.mutation_rate) gene = rng_.index(sc_.topology.size());
        // Duplicates are replaced by random immigrants to keep the population diverse.
        const bool duplicate = std::any_of(next.begin(), next.end(), [&](const Individual& x) { return x.genes == *child; });
        if (duplicate) *child = random_genes();
        if (next.size() < cfg_.population) next.push_back(evaluate(std::move(*child)));
      }
    }
    pop = std::move(next);
    record();
  }

  if (!best_) throw InfeasibleError("genetic search found no feasible plan");
  result.best = best_->genes;
  result.plan = decode(sc_, slots_, best_->genes);
  result.total_delay = best_->total;
  result.evaluations = evaluations_;
  return result;
}

}  // namespace

GaResult genetic_search(const Scenario& scenario, const GaConfig& cfg, const std::vector<Chromosome>& initial) {
  cfg.validate();
  return GaRun(scenario, cfg).run(initial);
}

}  // namespace edgeorch
