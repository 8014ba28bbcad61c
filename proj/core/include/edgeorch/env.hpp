#pragma once

// Sequential placement environment. An episode places every budgeted
// service instance one at a time; after each placement the routing is
// recomputed proportionally and the total delay re-evaluated. The reward is
// the per-step delay improvement, with a final settlement term comparing the
// finished plan to the previous episode and to the best plan seen so far.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "edgeorch/delay.hpp"
#include "edgeorch/model.hpp"

namespace edgeorch {

// Node-feature graph with explicit directed edges (source, target). Every
// node carries a self loop.
struct FeatureGraph {
  std::size_t nodes = 0;
  std::size_t feature_dim = 0;
  std::vector<double> features;  // nodes x feature_dim, row-major
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  double feature(std::size_t node, std::size_t k) const { return features[node * feature_dim + k]; }
  friend bool operator==(const FeatureGraph&, const FeatureGraph&) = default;
};

struct EnvState {
  std::vector<double> arrival_dist;       // lambda of the pending service per server
  std::vector<std::uint8_t> avail_mask;   // 1 where the pending service still fits
  FeatureGraph deploy_graph;              // servers; features = instance counts per service
  std::vector<FeatureGraph> route_graphs; // one per request using the pending service
  FeatureGraph invoke_graph;              // services; [id, cpu, gpu, mem, D_s, mu_s]
  ServiceIndex pending_service = 0;
  std::size_t cursor = 0;
  std::size_t total_steps = 0;

  std::size_t servers() const { return avail_mask.size(); }
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

inline constexpr std::size_t kInvokeFeatureDim = 6;

struct PendingSchedule {
  std::vector<ServiceIndex> slots;
  std::size_t cursor = 0;

  std::size_t total() const { return slots.size(); }
  bool finished() const { return cursor >= slots.size(); }
  ServiceIndex current() const { return slots.at(cursor); }
};

struct RewardConfig {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 1.0;
  double scaling_bonus = 0.1;            // c; 0 disables it
  std::optional<double> t_penalty;       // overrides the scenario's penalty in rewards
  double equal_tolerance = 1e-9;
};

// N^s = max(1, ceil(demand_s / (rho_target * mu_s))) for every service used
// by some chain; 0 for unused services.
std::vector<int> instance_budget(const Scenario& scenario);

// Slots ordered by first appearance along the request chains, then by
// service index; each service's instances are contiguous.
PendingSchedule build_schedule(const Scenario& scenario, const std::vector<int>& budget);

// Throws SetupError when the budget cannot fit the cluster in aggregate.
void check_budget_capacity(const Scenario& scenario, const std::vector<int>& budget);

EnvState build_state(const DeploymentPlan& plan, const RoutingPolicy& routing,
                     const ArrivalRates& arrivals, const Scenario& scenario,
                     const PendingSchedule& pending);

// The availability mask of the pending service. Throws DeadlockError when
// no server can host it.
std::vector<std::uint8_t> action_mask(const EnvState& state);

struct StepResult {
  EnvState state;
  double reward = 0.0;
  double intermediate = 0.0;  // R1 part
  double settlement = 0.0;    // R2 part (non-zero only on the final step)
  bool done = false;
};

class OrchestrationEnv {
 public:
  OrchestrationEnv(Scenario scenario, RewardConfig rewards = {});

  // Empty plan, fresh schedule. Cross-episode memory (previous round total,
  // best total) is kept.
  const EnvState& reset();
  // Throws ContractViolation for a masked action or a finished episode.
  StepResult step(ServerIndex action);

  const EnvState& state() const { return state_; }
  const Scenario& scenario() const { return scenario_; }
  const DeploymentPlan& plan() const { return plan_; }
  const std::vector<int>& budget() const { return budget_; }
  std::size_t total_steps() const { return schedule_.total(); }
  bool done() const { return schedule_.finished(); }

  double initial_total() const { return initial_total_; }
  double current_total() const { return current_total_; }
  std::optional<double> previous_round_total() const { return previous_round_; }
  std::optional<double> best_total() const { return best_total_; }
  double penalty() const;

  // Forget cross-episode memory.
  void reset_history();

 private:
  PlanEvaluation evaluate() const;

  Scenario scenario_;
  RewardConfig rewards_;
  std::vector<int> budget_;
  PendingSchedule schedule_;
  DeploymentPlan plan_;
  EnvState state_;
  double initial_total_ = 0.0;
  double current_total_ = 0.0;
  std::optional<double> previous_round_;
  std::optional<double> best_total_;
};

}  // namespace edgeorch
