#include "edgeorch/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "edgeorch/errors.hpp"

namespace edgeorch {

namespace {

void add_self_loops(FeatureGraph& g) {
  for (std::uint32_t n = 0; n < g.nodes; ++n) g.edges.emplace_back(n, n);
}

FeatureGraph deploy_graph(const DeploymentPlan& plan, const NetworkTopology& topo) {
  FeatureGraph g;
  g.nodes = plan.servers();
  g.feature_dim = plan.services();
  g.features.reserve(g.nodes * g.feature_dim);
  for (int c : plan.raw()) g.features.push_back(static_cast<double>(c));
  add_self_loops(g);
  for (std::uint32_t a = 0; a < g.nodes; ++a)
    for (std::uint32_t b = 0; b < g.nodes; ++b)
      if (topo.linked(a, b)) g.edges.emplace_back(a, b);
  return g;
}

FeatureGraph route_graph(const Scenario& scenario, RequestIndex r, const RoutingPolicy& routing,
                         const ArrivalRates& arrivals) {
  const std::size_t N = routing.servers();
  const std::size_t S = scenario.services.size();
  const auto& req = scenario.requests[r];
  const auto& route = routing.request(r);
  const auto& visits = arrivals.visits[r];

  FeatureGraph g;
  g.nodes = N;
  g.feature_dim = S;
  g.features.assign(N * S, 0.0);
  for (std::size_t k = 0; k < req.chain.size(); ++k)
    for (std::size_t n = 0; n < N; ++n) g.features[n * S + req.chain[k]] += visits[k][n];

  add_self_loops(g);
  std::set<std::pair<std::uint32_t, std::uint32_t>> forward;
  for (std::size_t n = 0; n < N; ++n)
    if (route.entry[n] > 0.0 && n != req.entry_server)
      forward.emplace(std::uint32_t(req.entry_server), std::uint32_t(n));
  const std::size_t reachable = route.unreachable_stage.value_or(req.chain.size());
  for (std::size_t k = 0; k + 1 < reachable; ++k)
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < N; ++b)
        if (a != b && routing.hop(r, k, a, b) > 0.0) forward.emplace(std::uint32_t(a), std::uint32_t(b));
  g.edges.insert(g.edges.end(), forward.begin(), forward.end());
  return g;
}

FeatureGraph invoke_graph(const Scenario& scenario) {
  const std::size_t S = scenario.services.size();
  FeatureGraph g;
  g.nodes = S;
  g.feature_dim = kInvokeFeatureDim;
  g.features.reserve(S * kInvokeFeatureDim);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& spec = scenario.services[s];
    g.features.insert(g.features.end(),
                      {static_cast<double>(s), static_cast<double>(spec.cpu_req),
                       static_cast<double>(spec.gpu_req), spec.mem_req_gb, spec.output_size_mb,
                       spec.proc_rate});
  }
  add_self_loops(g);
  std::set<std::pair<std::uint32_t, std::uint32_t>> deps;
  for (const auto& req : scenario.requests)
    for (std::size_t k = 0; k + 1 < req.chain.size(); ++k)
      if (req.chain[k] != req.chain[k + 1])
        deps.emplace(std::uint32_t(req.chain[k]), std::uint32_t(req.chain[k + 1]));
  g.edges.insert(g.edges.end(), deps.begin(), deps.end());
  return g;
}

}  // namespace

std::vector<int> instance_budget(const Scenario& scenario) {
  const std::size_t S = scenario.services.size();
  std::vector<double> demand(S, 0.0);
  std::vector<bool> used(S, false);
  for (const auto& req : scenario.requests) {
    for (auto s : req.chain) {
      demand[s] += req.arrival_rate;
      used[s] = true;
    }
  }
  std::vector<int> budget(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    if (!used[s]) continue;
    const double per_instance = scenario.settings.rho_target * scenario.services[s].proc_rate;
    // Relative slack so exact multiples are not bumped by rounding noise.
    const double needed = std::ceil(demand[s] / per_instance * (1.0 - 1e-12));
    budget[s] = std::max(1, static_cast<int>(needed));
  }
  return budget;
}

PendingSchedule build_schedule(const Scenario& scenario, const std::vector<int>& budget) {
  std::vector<ServiceIndex> order;
  std::vector<bool> seen(scenario.services.size(), false);
  for (const auto& req : scenario.requests) {
    for (auto s : req.chain) {
      if (!seen[s]) {
        seen[s] = true;
        order.push_back(s);
      }
    }
  }
  for (std::size_t s = 0; s < scenario.services.size(); ++s)
    if (!seen[s]) order.push_back(s);

  PendingSchedule schedule;
  for (auto s : order)
    for (int i = 0; i < budget.at(s); ++i) schedule.slots.push_back(s);
  return schedule;
}

void check_budget_capacity(const Scenario& scenario, const std::vector<int>& budget) {
  long long cpu_cap = 0, gpu_cap = 0, hac_cpu = 0;
  double mem_cap = 0.0, hac_mem = 0.0;
  for (const auto& n : scenario.topology.nodes()) {
    cpu_cap += n.cpu_capacity;
    mem_cap += n.mem_capacity_gb;
    if (n.kind == ServerKind::hac) {
      gpu_cap += n.gpu_capacity;
      hac_cpu += n.cpu_capacity;
      hac_mem += n.mem_capacity_gb;
    }
  }
  long long cpu = 0, gpu = 0, ai_cpu = 0;
  double mem = 0.0, ai_mem = 0.0;
  for (std::size_t s = 0; s < scenario.services.size(); ++s) {
    const auto& spec = scenario.services[s];
    cpu += static_cast<long long>(budget[s]) * spec.cpu_req;
    gpu += static_cast<long long>(budget[s]) * spec.gpu_req;
    mem += budget[s] * spec.mem_req_gb;
    if (spec.kind == ServiceKind::ai) {
      ai_cpu += static_cast<long long>(budget[s]) * spec.cpu_req;
      ai_mem += budget[s] * spec.mem_req_gb;
    }
  }
  auto fail = [](const std::string& what, double need, double have) {
    std::ostringstream os;
    os << "instance budget needs " << need << " " << what << " but the cluster offers " << have;
    throw SetupError(os.str());
  };
  if (cpu > cpu_cap) fail("CPU cores", double(cpu), double(cpu_cap));
  if (gpu > gpu_cap) fail("GPUs", double(gpu), double(gpu_cap));
  if (mem > mem_cap + 1e-9) fail("GB of memory", mem, mem_cap);
  if (ai_cpu > hac_cpu) fail("HAC CPU cores", double(ai_cpu), double(hac_cpu));
  if (ai_mem > hac_mem + 1e-9) fail("GB of HAC memory", ai_mem, hac_mem);
}

EnvState build_state(const DeploymentPlan& plan, const RoutingPolicy& routing,
                     const ArrivalRates& arrivals, const Scenario& scenario,
                     const PendingSchedule& pending) {
  const std::size_t N = scenario.topology.size();
  EnvState state;
  state.cursor = pending.cursor;
  state.total_steps = pending.total();
  state.deploy_graph = deploy_graph(plan, scenario.topology);
  state.invoke_graph = invoke_graph(scenario);
  if (pending.finished()) {
    state.arrival_dist.assign(N, 0.0);
    state.avail_mask.assign(N, 0);
    state.pending_service = pending.slots.empty() ? 0 : pending.slots.back();
    return state;
  }
  const ServiceIndex s = pending.current();
  state.pending_service = s;
  state.arrival_dist.resize(N);
  for (std::size_t n = 0; n < N; ++n) state.arrival_dist[n] = arrivals.at(n, s);
  state.avail_mask = availability_mask(plan, scenario.topology, scenario.services, s);
  for (std::size_t r = 0; r < scenario.requests.size(); ++r) {
    const auto& chain = scenario.requests[r].chain;
    if (std::find(chain.begin(), chain.end(), s) != chain.end())
      state.route_graphs.push_back(route_graph(scenario, r, routing, arrivals));
  }
  return state;
}

std::vector<std::uint8_t> action_mask(const EnvState& state) {
  if (state.cursor >= state.total_steps) throw ContractViolation("episode already finished");
  if (std::none_of(state.avail_mask.begin(), state.avail_mask.end(), [](auto m) { return m != 0; })) {
    std::ostringstream os;
    os << "no server can host service " << state.pending_service << " at step " << state.cursor;
    throw DeadlockError(os.str());
  }
  return state.avail_mask;
}

OrchestrationEnv::OrchestrationEnv(Scenario scenario, RewardConfig rewards)
    : scenario_(std::move(scenario)), rewards_(rewards) {
  scenario_.validate();
  if (!(rewards_.alpha1 > 0.0)) throw ConfigError("alpha1 must be positive");
  budget_ = instance_budget(scenario_);
}

double OrchestrationEnv::penalty() const {
  return rewards_.t_penalty.value_or(scenario_.settings.t_penalty);
}

PlanEvaluation OrchestrationEnv::evaluate() const { return evaluate_plan(scenario_, plan_, penalty()); }

void OrchestrationEnv::reset_history() {
  previous_round_.reset();
  best_total_.reset();
}

const EnvState& OrchestrationEnv::reset() {
  check_budget_capacity(scenario_, budget_);
  schedule_ = build_schedule(scenario_, budget_);
  plan_ = DeploymentPlan(scenario_.topology.size(), scenario_.services.size());
  const auto eval = evaluate();
  initial_total_ = eval.total;
  current_total_ = eval.total;
  state_ = build_state(plan_, eval.routing, eval.arrivals, scenario_, schedule_);
  return state_;
}

StepResult OrchestrationEnv::step(ServerIndex action) {
  if (schedule_.finished()) throw ContractViolation("step on a finished episode");
  if (action >= state_.avail_mask.size() || state_.avail_mask[action] == 0) {
    std::ostringstream os;
    os << "action " << action << " is masked at step " << schedule_.cursor;
    throw ContractViolation(os.str());
  }
  plan_.add(action, schedule_.current());
  ++schedule_.cursor;

  const auto eval = evaluate();
  const double before = current_total_;
  const double after = eval.total;
  current_total_ = after;

  StepResult out;
  if (std::abs(before - after) > rewards_.equal_tolerance) {
    out.intermediate = rewards_.alpha1 * (before - after);
  } else {
    out.intermediate = rewards_.scaling_bonus;
  }
  if (schedule_.finished()) {
    const double prev = previous_round_.value_or(after);
    best_total_ = best_total_ ? std::min(*best_total_, after) : after;
    out.settlement = rewards_.alpha2 * (prev - after) + rewards_.alpha3 * (prev - *best_total_);
    previous_round_ = after;
    out.done = true;
  }
  out.reward = out.intermediate + out.settlement;
  state_ = build_state(plan_, eval.routing, eval.arrivals, scenario_, schedule_);
  out.state = state_;
  return out;
}

}  // namespace edgeorch
