#include "edgeorch/delay.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "edgeorch/errors.hpp"

namespace edgeorch {

namespace {

constexpr double kMassTolerance = 1e-9;

// Fills `row` (size |N|) with the proportional split from `source` towards
// instances of `service`. Returns false when no adjacent instance exists.
bool proportional_row(const DeploymentPlan& plan, const NetworkTopology& topo, ServerIndex source,
                      ServiceIndex service, double* row) {
  const std::size_t servers = topo.size();
  double total = 0.0;
  for (std::size_t n = 0; n < servers; ++n) {
    if (topo.adjacent(source, n)) total += plan.count(n, service);
  }
  if (total <= 0.0) {
    for (std::size_t n = 0; n < servers; ++n) row[n] = 0.0;
    return false;
  }
  for (std::size_t n = 0; n < servers; ++n) {
    row[n] = topo.adjacent(source, n) ? plan.count(n, service) / total : 0.0;
  }
  return true;
}

// Per-group M/M/c sojourn time, NaN where the queue is unstable.
std::vector<double> sojourn_table(const Scenario& scenario, const DeploymentPlan& plan,
                                  const ArrivalRates& arrivals) {
  const std::size_t S = scenario.services.size();
  std::vector<double> table(plan.servers() * S, 0.0);
  for (std::size_t n = 0; n < plan.servers(); ++n) {
    for (std::size_t s = 0; s < S; ++s) {
      const double lambda = arrivals.at(n, s);
      const int c = plan.count(n, s);
      const double mu = scenario.services[s].proc_rate;
      if (c == 0) {
        table[n * S + s] = lambda > 0.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        continue;
      }
      if (lambda >= c * mu) {
        table[n * S + s] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      table[n * S + s] = mmc_sojourn(lambda, mu, c);
    }
  }
  return table;
}

RequestDelay request_delay(const Scenario& scenario, RequestIndex r, const RoutingPolicy& routing,
                           const ArrivalRates& arrivals, const std::vector<double>& sojourn,
                           const HopDelayTable& hops, double penalty) {
  const auto& req = scenario.requests.at(r);
  const auto& route = routing.request(r);
  if (!route.routable()) return InfeasibleDelay{InfeasibleReason::unreachable_stage, penalty};

  const std::size_t N = routing.servers();
  const std::size_t S = scenario.services.size();
  const auto& visits = arrivals.visits.at(r);
  const double bandwidth = scenario.access_bandwidth(r);

  DelayBreakdown out;
  out.transmit = transfer_time(req.payload_mb, bandwidth);
  out.return_ = transfer_time(req.result_mb, bandwidth);

  for (std::size_t k = 0; k < req.chain.size(); ++k) {
    const ServiceIndex s = req.chain[k];
    for (std::size_t n = 0; n < N; ++n) {
      const double v = visits[k][n];
      if (v <= 0.0) continue;
      const double w = sojourn[n * S + s];
      if (std::isnan(w)) return InfeasibleDelay{InfeasibleReason::unstable_queue, penalty};
      out.queue_process += v * w;
    }
  }
  for (std::size_t k = 0; k + 1 < req.chain.size(); ++k) {
    const ServiceIndex s = req.chain[k];
    for (std::size_t from = 0; from < N; ++from) {
      const double v = visits[k][from];
      if (v <= 0.0) continue;
      for (std::size_t to = 0; to < N; ++to) {
        if (to == from) continue;
        const double p = routing.hop(r, k, from, to);
        if (p <= 0.0) continue;
        out.communicate += v * p * hops(from, to, s);
      }
    }
  }
  out.total = out.transmit + out.queue_process + out.communicate + out.return_;
  return out;
}

}  // namespace

bool RoutingPolicy::all_routable() const {
  for (const auto& r : requests_)
    if (!r.routable()) return false;
  return true;
}

RoutingPolicy proportional_routing(const DeploymentPlan& plan, const NetworkTopology& topo,
                                   const std::vector<RequestClass>& requests) {
  if (plan.servers() != topo.size()) throw StructuralError("plan/topology size mismatch");
  const std::size_t N = topo.size();
  std::vector<RequestRouting> out;
  out.reserve(requests.size());

  for (const auto& req : requests) {
    RequestRouting route;
    route.entry.assign(N, 0.0);
    const std::size_t K = req.chain.size();
    route.hops.assign(K > 0 ? K - 1 : 0, std::vector<double>(N * N, 0.0));
    if (K == 0) {
      route.unreachable_stage = 0;
      out.push_back(std::move(route));
      continue;
    }
    if (!proportional_row(plan, topo, req.entry_server, req.chain[0], route.entry.data())) {
      route.unreachable_stage = 0;
    }
    std::vector<double> visit = route.entry;
    for (std::size_t k = 0; k + 1 < K && route.routable(); ++k) {
      const ServiceIndex cur = req.chain[k];
      const ServiceIndex next = req.chain[k + 1];
      auto& matrix = route.hops[k];
      std::vector<double> next_visit(N, 0.0);
      for (std::size_t from = 0; from < N; ++from) {
        if (!plan.occupied(from, cur)) continue;
        const bool ok = proportional_row(plan, topo, from, next, &matrix[from * N]);
        if (visit[from] <= 0.0) continue;
        if (!ok) {
          route.unreachable_stage = k + 1;
          break;
        }
        for (std::size_t to = 0; to < N; ++to) next_visit[to] += visit[from] * matrix[from * N + to];
      }
      visit = std::move(next_visit);
    }
    out.push_back(std::move(route));
  }
  return RoutingPolicy(N, std::move(out));
}

void require_routable(const RoutingPolicy& routing, const std::vector<RequestClass>& requests) {
  for (std::size_t r = 0; r < routing.size(); ++r) {
    const auto& route = routing.request(r);
    if (!route.routable()) {
      std::ostringstream os;
      os << "request '" << requests.at(r).id << "' has no reachable instance for stage "
         << *route.unreachable_stage;
      throw UnreachableStageError(os.str());
    }
  }
}

ArrivalRates propagate_arrivals(const DeploymentPlan& plan, const RoutingPolicy& routing,
                                const std::vector<RequestClass>& requests) {
  if (routing.size() != requests.size()) throw StructuralError("routing/request count mismatch");
  const std::size_t N = plan.servers();
  const std::size_t S = plan.services();
  ArrivalRates out;
  out.servers = N;
  out.services = S;
  out.per_group.assign(N * S, 0.0);
  out.visits.resize(requests.size());

  for (std::size_t r = 0; r < requests.size(); ++r) {
    const auto& req = requests[r];
    const auto& route = routing.request(r);
    const std::size_t K = req.chain.size();
    // Stages strictly before the unreachable one carry traffic.
    const std::size_t reachable = route.unreachable_stage.value_or(K);
    auto& visits = out.visits[r];
    visits.assign(K, std::vector<double>(N, 0.0));
    if (reachable == 0) continue;

    visits[0] = route.entry;
    for (std::size_t k = 0; k + 1 < reachable; ++k) {
      for (std::size_t from = 0; from < N; ++from) {
        const double v = visits[k][from];
        if (v <= 0.0) continue;
        for (std::size_t to = 0; to < N; ++to) {
          visits[k + 1][to] += v * routing.hop(r, k, from, to);
        }
      }
    }
    for (std::size_t k = 0; k < reachable; ++k) {
      double mass = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        mass += visits[k][n];
        out.per_group[n * S + req.chain[k]] += req.arrival_rate * visits[k][n];
      }
      if (std::abs(mass - 1.0) > kMassTolerance) {
        std::ostringstream os;
        os << "request '" << req.id << "' stage " << k << " carries probability mass " << mass;
        throw ConsistencyError(os.str());
      }
    }
  }
  return out;
}

Utilization utilization(const ArrivalRates& arrivals, const DeploymentPlan& plan,
                        const std::vector<ServiceSpec>& services) {
  Utilization u;
  u.services = services.size();
  u.rho.assign(plan.servers() * services.size(), 0.0);
  for (std::size_t n = 0; n < plan.servers(); ++n) {
    for (std::size_t s = 0; s < services.size(); ++s) {
      const double lambda = arrivals.at(n, s);
      if (lambda <= 0.0) continue;
      const int c = plan.count(n, s);
      if (c == 0) {
        std::ostringstream os;
        os << "traffic " << lambda << " reaches server " << n << " service '" << services[s].id
           << "' with no instance";
        throw UnreachableStageError(os.str());
      }
      const double rho = lambda / (c * services[s].proc_rate);
      u.rho[n * services.size() + s] = rho;
      if (rho >= 1.0) u.stable = false;
    }
  }
  return u;
}

double mmc_sojourn(double lambda, double mu, int servers) {
  if (!(mu > 0.0) || servers < 1 || lambda < 0.0)
    throw ContractViolation("mmc_sojourn needs lambda >= 0, mu > 0, c >= 1");
  const double c = static_cast<double>(servers);
  if (lambda >= c * mu) throw UnstableQueueError("arrival rate reaches c * mu");
  if (lambda == 0.0) return 1.0 / mu;

  const double a = lambda / mu;  // offered load
  const double rho = a / c;
  // sum_{k<c} a^k / k! and a^c / c!, built incrementally.
  double term = 1.0;
  double partial = 0.0;
  for (int k = 0; k < servers; ++k) {
    partial += term;
    term *= a / (k + 1);
  }
  const double tail = term;  // a^c / c!
  const double p_empty = 1.0 / (partial + tail / (1.0 - rho));
  // Waiting term p0 * rho * a^c / (lambda * c! * (1 - rho)^2), with rho / lambda
  // rewritten as 1 / (c mu) so lambda -> 0 stays finite.
  const double wait = p_empty * tail / ((1.0 - rho) * (1.0 - rho) * c * mu);
  return wait + 1.0 / mu;
}

HopDelayTable::HopDelayTable(const NetworkTopology& topo, const std::vector<ServiceSpec>& services)
    : topo_(&topo), services_(services.size()) {
  const std::size_t N = topo.size();
  delay_.assign(N * N * services_, 0.0);
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = 0; b < N; ++b) {
      if (a == b || !topo.linked(a, b)) continue;
      for (std::size_t s = 0; s < services_; ++s) {
        delay_[(a * N + b) * services_ + s] =
            transfer_time(services[s].output_size_mb, topo.bandwidth(a, b));
      }
    }
  }
}

double HopDelayTable::operator()(ServerIndex from, ServerIndex to, ServiceIndex service) const {
  if (from == to) return 0.0;
  if (!topo_->linked(from, to)) {
    std::ostringstream os;
    os << "servers " << from << " and " << to << " are not linked";
    throw StructuralError(os.str());
  }
  return delay_[(from * topo_->size() + to) * services_ + service];
}

HopDelayTable hop_delays(const NetworkTopology& topo, const std::vector<ServiceSpec>& services) {
  return HopDelayTable(topo, services);
}

RequestDelay expected_request_delay(const Scenario& scenario, RequestIndex r,
                                    const DeploymentPlan& plan, const RoutingPolicy& routing,
                                    const ArrivalRates& arrivals) {
  const auto sojourn = sojourn_table(scenario, plan, arrivals);
  const HopDelayTable hops(scenario.topology, scenario.services);
  return request_delay(scenario, r, routing, arrivals, sojourn, hops, scenario.settings.t_penalty);
}

std::vector<RoutingPath> enumerate_paths(const RequestClass& request, RequestIndex r,
                                         const RoutingPolicy& routing, std::size_t chain_cap,
                                         std::size_t path_cap) {
  const std::size_t K = request.chain.size();
  if (K > chain_cap) throw ContractViolation("chain too long for path enumeration");
  const auto& route = routing.request(r);
  if (!route.routable()) throw UnreachableStageError("request '" + request.id + "' is not routable");
  const std::size_t N = routing.servers();

  std::vector<RoutingPath> paths;
  for (std::size_t n = 0; n < N; ++n) {
    if (route.entry[n] > 0.0) paths.push_back({{n}, route.entry[n]});
  }
  for (std::size_t k = 0; k + 1 < K; ++k) {
    std::vector<RoutingPath> grown;
    for (const auto& path : paths) {
      const ServerIndex from = path.servers.back();
      for (std::size_t to = 0; to < N; ++to) {
        const double p = routing.hop(r, k, from, to);
        if (p <= 0.0) continue;
        if (grown.size() >= path_cap) throw ContractViolation("too many routing paths");
        RoutingPath next = path;
        next.servers.push_back(to);
        next.probability *= p;
        grown.push_back(std::move(next));
      }
    }
    paths = std::move(grown);
  }
  return paths;
}

double total_delay(const DeploymentPlan& plan, const RoutingPolicy& routing,
                   const Scenario& scenario) {
  const double penalty = scenario.settings.t_penalty;
  ArrivalRates arrivals = propagate_arrivals(plan, routing, scenario.requests);
  const auto sojourn = sojourn_table(scenario, plan, arrivals);
  const HopDelayTable hops(scenario.topology, scenario.services);
  double total = 0.0;
  for (std::size_t r = 0; r < scenario.requests.size(); ++r) {
    total += delay_value(request_delay(scenario, r, routing, arrivals, sojourn, hops, penalty));
  }
  return total;
}

PlanEvaluation evaluate_plan(const Scenario& scenario, const DeploymentPlan& plan,
                             std::optional<double> penalty) {
  const double t_penalty = penalty.value_or(scenario.settings.t_penalty);
  PlanEvaluation eval;
  eval.routing = proportional_routing(plan, scenario.topology, scenario.requests);
  eval.arrivals = propagate_arrivals(plan, eval.routing, scenario.requests);
  const auto sojourn = sojourn_table(scenario, plan, eval.arrivals);
  const HopDelayTable hops(scenario.topology, scenario.services);
  eval.requests.reserve(scenario.requests.size());
  for (std::size_t r = 0; r < scenario.requests.size(); ++r) {
    eval.requests.push_back(
        request_delay(scenario, r, eval.routing, eval.arrivals, sojourn, hops, t_penalty));
    eval.total += delay_value(eval.requests.back());
    eval.feasible = eval.feasible && is_feasible(eval.requests.back());
  }
  return eval;
}

}  // namespace edgeorch
