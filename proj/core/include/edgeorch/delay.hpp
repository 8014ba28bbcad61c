#pragma once

// Analytical end-to-end delay of request chains on a deployment plan.
//
// Every (server, service) instance group is an M/M/c queue with c = N_n^s,
// fed by the pooled Poisson traffic of all request classes visiting it.
// Traffic is propagated stage by stage along each chain using the routing
// probabilities, and the expected delay of a request is assembled from the
// marginal visit probabilities of each stage (identical, by linearity of
// expectation, to summing over every routing path weighted by its
// probability).

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "edgeorch/model.hpp"

namespace edgeorch {

// Seconds to push `size_mb` megabytes through a `bandwidth_gbps` link.
inline double transfer_time(double size_mb, double bandwidth_gbps) {
  return size_mb * 8.0 / (bandwidth_gbps * 1000.0);
}

struct RequestRouting {
  // First chain stage without an adjacent instance for some location that
  // carries positive probability mass. Empty when the request is routable.
  std::optional<std::size_t> unreachable_stage;
  // P(stage 0 is served at n), from the entry server.
  std::vector<double> entry;
  // hops[k][from * |N| + to] = P(stage k+1 at `to` | stage k at `from`).
  std::vector<std::vector<double>> hops;

  bool routable() const { return !unreachable_stage.has_value(); }
};

class RoutingPolicy {
 public:
  RoutingPolicy() = default;
  RoutingPolicy(std::size_t servers, std::vector<RequestRouting> requests)
      : servers_(servers), requests_(std::move(requests)) {}

  std::size_t servers() const { return servers_; }
  std::size_t size() const { return requests_.size(); }
  const RequestRouting& request(RequestIndex r) const { return requests_.at(r); }
  RequestRouting& request(RequestIndex r) { return requests_.at(r); }

  double entry(RequestIndex r, ServerIndex n) const { return requests_[r].entry[n]; }
  double hop(RequestIndex r, std::size_t stage, ServerIndex from, ServerIndex to) const {
    return requests_[r].hops[stage][from * servers_ + to];
  }

  bool all_routable() const;

 private:
  std::size_t servers_ = 0;
  std::vector<RequestRouting> requests_;
};

// p = N_to^s / sum of N^s over servers adjacent to the source.
// Unreachable stages are recorded per request rather than thrown, since
// partially built plans are routine; see require_routable.
RoutingPolicy proportional_routing(const DeploymentPlan& plan, const NetworkTopology& topo,
                                   const std::vector<RequestClass>& requests);

// Throws UnreachableStageError naming the first unroutable request.
void require_routable(const RoutingPolicy& routing, const std::vector<RequestClass>& requests);

struct ArrivalRates {
  std::size_t servers = 0;
  std::size_t services = 0;
  // Aggregated lambda_n^s, dense |N| x |S|.
  std::vector<double> per_group;
  // visits[r][k][n] = P(stage k of request r is served at n). Stages past an
  // unreachable one are all zero.
  std::vector<std::vector<std::vector<double>>> visits;

  double at(ServerIndex n, ServiceIndex s) const { return per_group[n * services + s]; }
};

// Forward traffic propagation. Throws ConsistencyError when probability mass
// is not conserved across a reachable stage.
ArrivalRates propagate_arrivals(const DeploymentPlan& plan, const RoutingPolicy& routing,
                                const std::vector<RequestClass>& requests);

struct Utilization {
  std::size_t services = 0;
  std::vector<double> rho;  // dense |N| x |S|, 0 where no traffic
  bool stable = true;

  double at(ServerIndex n, ServiceIndex s) const { return rho[n * services + s]; }
};

// rho = lambda / (N * mu). Throws UnreachableStageError if traffic reaches a
// group with no instances.
Utilization utilization(const ArrivalRates& arrivals, const DeploymentPlan& plan,
                        const std::vector<ServiceSpec>& services);

// Expected time in an M/M/c system (queueing + service). Throws
// UnstableQueueError when lambda >= c * mu.
double mmc_sojourn(double lambda, double mu, int servers);

// Communication delay table: D_s / B_{n,n'} for the output of service s.
class HopDelayTable {
 public:
  HopDelayTable(const NetworkTopology& topo, const std::vector<ServiceSpec>& services);

  // Zero on the same server. Throws StructuralError for unlinked pairs.
  double operator()(ServerIndex from, ServerIndex to, ServiceIndex service) const;

 private:
  const NetworkTopology* topo_;
  std::size_t services_;
  std::vector<double> delay_;
};

HopDelayTable hop_delays(const NetworkTopology& topo, const std::vector<ServiceSpec>& services);

struct DelayBreakdown {
  double transmit = 0.0;
  double queue_process = 0.0;
  double communicate = 0.0;
  double return_ = 0.0;
  double total = 0.0;
};

enum class InfeasibleReason { unstable_queue, unreachable_stage };

struct InfeasibleDelay {
  InfeasibleReason reason = InfeasibleReason::unreachable_stage;
  double penalty = 0.0;
};

using RequestDelay = std::variant<DelayBreakdown, InfeasibleDelay>;

inline double delay_value(const RequestDelay& d) {
  if (const auto* ok = std::get_if<DelayBreakdown>(&d)) return ok->total;
  return std::get<InfeasibleDelay>(d).penalty;
}

inline bool is_feasible(const RequestDelay& d) { return std::holds_alternative<DelayBreakdown>(d); }

// E[T(sc)] for one request class.
RequestDelay expected_request_delay(const Scenario& scenario, RequestIndex r,
                                    const DeploymentPlan& plan, const RoutingPolicy& routing,
                                    const ArrivalRates& arrivals);

struct RoutingPath {
  std::vector<ServerIndex> servers;  // one per chain stage
  double probability = 0.0;
};

inline constexpr std::size_t kDefaultPathChainCap = 8;
inline constexpr std::size_t kDefaultPathCountCap = 1u << 20;

// Every positive-probability routing path of request r with its product
// probability. Oracle-scale only: refuses chains longer than `chain_cap` or
// more than `path_cap` paths (ContractViolation).
std::vector<RoutingPath> enumerate_paths(const RequestClass& request, RequestIndex r,
                                         const RoutingPolicy& routing,
                                         std::size_t chain_cap = kDefaultPathChainCap,
                                         std::size_t path_cap = kDefaultPathCountCap);

// Sum of E[T(sc)] over all requests; infeasible requests contribute the
// scenario's t_penalty.
double total_delay(const DeploymentPlan& plan, const RoutingPolicy& routing,
                   const Scenario& scenario);

struct PlanEvaluation {
  RoutingPolicy routing;
  ArrivalRates arrivals;
  std::vector<RequestDelay> requests;
  double total = 0.0;
  bool feasible = true;  // every request has a finite delay
};

// proportional_routing + propagate_arrivals + per-request delays.
// `penalty` overrides scenario.settings.t_penalty when given.
PlanEvaluation evaluate_plan(const Scenario& scenario, const DeploymentPlan& plan,
                             std::optional<double> penalty = std::nullopt);

}  // namespace edgeorch
