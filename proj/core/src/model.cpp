#include "edgeorch/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "edgeorch/errors.hpp"

namespace edgeorch {

namespace {

constexpr double kMemSlack = 1e-9;

void check_shape(const DeploymentPlan& plan, std::size_t servers, std::size_t services) {
  if (plan.servers() != servers || plan.services() != services) {
    std::ostringstream os;
    os << "plan is " << plan.servers() << "x" << plan.services() << ", expected " << servers
       << "x" << services;
    throw StructuralError(os.str());
  }
}

}  // namespace

std::string to_string(ServerKind kind) { return kind == ServerKind::ucs ? "UCS" : "HAC"; }
std::string to_string(ServiceKind kind) { return kind == ServiceKind::micro ? "MICRO" : "AI"; }

std::string to_string(Resource r) {
  switch (r) {
    case Resource::cpu:
      return "cpu";
    case Resource::gpu:
      return "gpu";
    case Resource::mem:
      return "mem";
    case Resource::gpu_kind:
      return "gpu_kind";
  }
  return "?";
}

NetworkTopology::NetworkTopology(std::vector<ServerNode> nodes)
    : nodes_(std::move(nodes)), bandwidth_(nodes_.size() * nodes_.size(), 0.0) {}

void NetworkTopology::add_link(ServerIndex a, ServerIndex b, double bandwidth_gbps) {
  if (a >= size() || b >= size()) throw StructuralError("link endpoint out of range");
  if (a == b) throw StructuralError("self links are implicit");
  if (!(bandwidth_gbps > 0.0)) throw StructuralError("link bandwidth must be positive");
  bandwidth_[a * size() + b] = bandwidth_gbps;
  bandwidth_[b * size() + a] = bandwidth_gbps;
}

bool NetworkTopology::linked(ServerIndex a, ServerIndex b) const {
  return a != b && bandwidth_[a * size() + b] > 0.0;
}

double NetworkTopology::bandwidth(ServerIndex a, ServerIndex b) const {
  return bandwidth_[a * size() + b];
}

std::size_t NetworkTopology::link_count() const {
  std::size_t count = 0;
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = a + 1; b < size(); ++b)
      if (linked(a, b)) ++count;
  return count;
}

std::vector<ServerIndex> NetworkTopology::neighbors(ServerIndex n) const {
  std::vector<ServerIndex> out;
  for (std::size_t m = 0; m < size(); ++m)
    if (linked(n, m)) out.push_back(m);
  return out;
}

std::optional<ServerIndex> NetworkTopology::find(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return i;
  return std::nullopt;
}

bool RequestClass::is_ai(const std::vector<ServiceSpec>& services) const {
  return std::any_of(chain.begin(), chain.end(),
                     [&](ServiceIndex s) { return services.at(s).kind == ServiceKind::ai; });
}

double Scenario::access_bandwidth(RequestIndex r) const {
  const auto& req = requests.at(r);
  if (req.access_bandwidth_gbps) return *req.access_bandwidth_gbps;
  return topology.node(req.entry_server).access_bandwidth_gbps;
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (topology.size() == 0) fail("scenario has no servers");
  std::set<std::string> ids;
  for (const auto& n : topology.nodes()) {
    if (!ids.insert(n.id).second) fail("duplicate server id '" + n.id + "'");
    if (n.cpu_capacity < 0 || n.gpu_capacity < 0 || n.mem_capacity_gb < 0.0)
      fail("server '" + n.id + "' has a negative capacity");
    if (n.kind == ServerKind::ucs && n.gpu_capacity != 0)
      fail("UCS server '" + n.id + "' must not have GPUs");
    if (n.kind == ServerKind::hac && n.gpu_capacity <= 0)
      fail("HAC server '" + n.id + "' needs at least one GPU");
    if (!(n.access_bandwidth_gbps > 0.0))
      fail("server '" + n.id + "' needs a positive access bandwidth");
  }
  ids.clear();
  for (const auto& s : services) {
    if (!ids.insert(s.id).second) fail("duplicate service id '" + s.id + "'");
    if (s.kind == ServiceKind::micro && s.gpu_req != 0)
      fail("microservice '" + s.id + "' cannot request GPUs");
    if (s.cpu_req < 0 || s.gpu_req < 0 || s.mem_req_gb < 0.0)
      fail("service '" + s.id + "' has a negative demand");
    if (!(s.proc_rate > 0.0)) fail("service '" + s.id + "' needs a positive rate");
    if (s.output_size_mb < 0.0) fail("service '" + s.id + "' has negative output size");
  }
  ids.clear();
  for (const auto& r : requests) {
    if (!ids.insert(r.id).second) fail("duplicate request id '" + r.id + "'");
    if (r.chain.empty()) fail("request '" + r.id + "' has an empty chain");
    for (auto s : r.chain)
      if (s >= services.size()) fail("request '" + r.id + "' references an unknown service");
    if (r.entry_server >= topology.size())
      fail("request '" + r.id + "' references an unknown entry server");
    if (!(r.arrival_rate > 0.0)) fail("request '" + r.id + "' needs a positive arrival rate");
    if (r.payload_mb < 0.0 || r.result_mb < 0.0)
      fail("request '" + r.id + "' has negative payload sizes");
    if (r.access_bandwidth_gbps && !(*r.access_bandwidth_gbps > 0.0))
      fail("request '" + r.id + "' has a non-positive access bandwidth");
  }
  if (!(settings.t_penalty > 0.0)) fail("t_penalty must be positive");
  if (!(settings.rho_target > 0.0 && settings.rho_target <= 1.0))
    fail("rho_target must lie in (0, 1]");
}

DeploymentPlan::DeploymentPlan(std::size_t servers, std::size_t services)
    : servers_(servers), services_(services), counts_(servers * services, 0) {}

void DeploymentPlan::set(ServerIndex n, ServiceIndex s, int value) {
  if (n >= servers_ || s >= services_) throw StructuralError("plan index out of range");
  if (value < 0) throw ContractViolation("instance counts cannot go negative");
  counts_[n * services_ + s] = value;
}

std::vector<int> DeploymentPlan::row(ServerIndex n) const {
  return {counts_.begin() + static_cast<std::ptrdiff_t>(n * services_),
          counts_.begin() + static_cast<std::ptrdiff_t>((n + 1) * services_)};
}

int DeploymentPlan::service_total(ServiceIndex s) const {
  int total = 0;
  for (std::size_t n = 0; n < servers_; ++n) total += count(n, s);
  return total;
}

int DeploymentPlan::total() const {
  int total = 0;
  for (int c : counts_) total += c;
  return total;
}

ResourceUsage server_usage(const DeploymentPlan& plan, const std::vector<ServiceSpec>& services,
                           ServerIndex n) {
  ResourceUsage u;
  for (std::size_t s = 0; s < plan.services(); ++s) {
    const int k = plan.count(n, s);
    if (k == 0) continue;
    u.cpu += static_cast<long long>(k) * services[s].cpu_req;
    u.gpu += static_cast<long long>(k) * services[s].gpu_req;
    u.mem_gb += k * services[s].mem_req_gb;
  }
  return u;
}

ConstraintReport validate_plan(const DeploymentPlan& plan, const NetworkTopology& topo,
                               const std::vector<ServiceSpec>& services) {
  check_shape(plan, topo.size(), services.size());
  ConstraintReport report;
  for (std::size_t n = 0; n < topo.size(); ++n) {
    const auto& node = topo.node(n);
    const auto used = server_usage(plan, services, n);
    if (used.cpu > node.cpu_capacity)
      report.violations.push_back({n, Resource::cpu, double(used.cpu), double(node.cpu_capacity)});
    if (used.gpu > node.gpu_capacity)
      report.violations.push_back({n, Resource::gpu, double(used.gpu), double(node.gpu_capacity)});
    if (used.mem_gb > node.mem_capacity_gb + kMemSlack)
      report.violations.push_back({n, Resource::mem, used.mem_gb, node.mem_capacity_gb});
    if (node.kind != ServerKind::hac) {
      for (std::size_t s = 0; s < services.size(); ++s) {
        if (services[s].kind == ServiceKind::ai && plan.count(n, s) > 0)
          report.violations.push_back({n, Resource::gpu_kind, double(plan.count(n, s)), 0.0});
      }
    }
  }
  report.feasible = report.violations.empty();
  return report;
}

ResourceUsage resource_usage(const DeploymentPlan& plan, const std::vector<ServiceSpec>& services) {
  if (plan.services() != services.size()) throw StructuralError("plan/service count mismatch");
  ResourceUsage total;
  for (std::size_t n = 0; n < plan.servers(); ++n) {
    const auto u = server_usage(plan, services, n);
    total.cpu += u.cpu;
    total.gpu += u.gpu;
    total.mem_gb += u.mem_gb;
  }
  return total;
}

std::vector<std::uint8_t> availability_mask(const DeploymentPlan& plan, const NetworkTopology& topo,
                                            const std::vector<ServiceSpec>& services,
                                            ServiceIndex service) {
  check_shape(plan, topo.size(), services.size());
  const auto& spec = services.at(service);
  std::vector<std::uint8_t> mask(topo.size(), 0);
  for (std::size_t n = 0; n < topo.size(); ++n) {
    const auto& node = topo.node(n);
    if (spec.kind == ServiceKind::ai && node.kind != ServerKind::hac) continue;
    const auto used = server_usage(plan, services, n);
    const bool fits = used.cpu + spec.cpu_req <= node.cpu_capacity &&
                      used.gpu + spec.gpu_req <= node.gpu_capacity &&
                      used.mem_gb + spec.mem_req_gb <= node.mem_capacity_gb + kMemSlack;
    mask[n] = fits ? 1 : 0;
  }
  return mask;
}

}  // namespace edgeorch
