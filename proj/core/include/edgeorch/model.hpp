#pragma once

// Domain types for the edge network: servers, links, services, request
// classes and deployment plans, plus resource feasibility checks.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace edgeorch {

using ServerIndex = std::size_t;
using ServiceIndex = std::size_t;
using RequestIndex = std::size_t;

enum class ServerKind { ucs, hac };
enum class ServiceKind { micro, ai };

std::string to_string(ServerKind kind);
std::string to_string(ServiceKind kind);

struct ServerNode {
  std::string id;
  ServerKind kind = ServerKind::ucs;
  int cpu_capacity = 0;
  int gpu_capacity = 0;
  double mem_capacity_gb = 0.0;
  // Wireless access bandwidth towards users entering at this server.
  double access_bandwidth_gbps = 1.0;
};

// Undirected server graph. Bandwidth 0 means "no link". A server is always
// adjacent to itself.
class NetworkTopology {
 public:
  NetworkTopology() = default;
  explicit NetworkTopology(std::vector<ServerNode> nodes);

  void add_link(ServerIndex a, ServerIndex b, double bandwidth_gbps);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<ServerNode>& nodes() const { return nodes_; }
  const ServerNode& node(ServerIndex n) const { return nodes_.at(n); }

  bool linked(ServerIndex a, ServerIndex b) const;
  // e^n_{n'}: linked or identical.
  bool adjacent(ServerIndex a, ServerIndex b) const { return a == b || linked(a, b); }
  double bandwidth(ServerIndex a, ServerIndex b) const;
  std::size_t link_count() const;
  std::vector<ServerIndex> neighbors(ServerIndex n) const;

  std::optional<ServerIndex> find(const std::string& id) const;

 private:
  std::vector<ServerNode> nodes_;
  std::vector<double> bandwidth_;  // dense |N| x |N|, symmetric
};

struct ServiceSpec {
  std::string id;
  ServiceKind kind = ServiceKind::micro;
  int cpu_req = 0;
  int gpu_req = 0;
  double mem_req_gb = 0.0;
  double output_size_mb = 0.0;
  double proc_rate = 1.0;  // requests per second, per instance
};

struct RequestClass {
  std::string id;
  std::vector<ServiceIndex> chain;
  ServerIndex entry_server = 0;
  double arrival_rate = 0.0;
  double payload_mb = 0.0;
  double result_mb = 0.0;
  // B_{n,sc}; falls back to the entry server's access bandwidth.
  std::optional<double> access_bandwidth_gbps;

  bool is_ai(const std::vector<ServiceSpec>& services) const;
};

struct ScenarioSettings {
  double t_penalty = 1e6;
  double rho_target = 0.8;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  NetworkTopology topology;
  std::vector<ServiceSpec> services;
  std::vector<RequestClass> requests;
  ScenarioSettings settings;

  double access_bandwidth(RequestIndex r) const;
  // Throws ConfigError describing the first broken invariant.
  void validate() const;
};

// N_n^s, dense |servers| x |services|.
class DeploymentPlan {
 public:
  DeploymentPlan() = default;
  DeploymentPlan(std::size_t servers, std::size_t services);

  std::size_t servers() const { return servers_; }
  std::size_t services() const { return services_; }

  int count(ServerIndex n, ServiceIndex s) const { return counts_[n * services_ + s]; }
  void set(ServerIndex n, ServiceIndex s, int value);
  void add(ServerIndex n, ServiceIndex s, int delta = 1) { set(n, s, count(n, s) + delta); }
  bool occupied(ServerIndex n, ServiceIndex s) const { return count(n, s) > 0; }

  std::vector<int> row(ServerIndex n) const;
  int service_total(ServiceIndex s) const;
  int total() const;

  const std::vector<int>& raw() const { return counts_; }

  friend bool operator==(const DeploymentPlan&, const DeploymentPlan&) = default;

 private:
  std::size_t servers_ = 0;
  std::size_t services_ = 0;
  std::vector<int> counts_;
};

enum class Resource { cpu, gpu, mem, gpu_kind };
std::string to_string(Resource r);

struct Violation {
  ServerIndex server = 0;
  Resource resource = Resource::cpu;
  double used = 0.0;
  double capacity = 0.0;
};

struct ConstraintReport {
  bool feasible = true;
  std::vector<Violation> violations;
};

struct ResourceUsage {
  long long cpu = 0;
  long long gpu = 0;
  double mem_gb = 0.0;
};

// Throws StructuralError when the plan shape does not match topo x services.
ConstraintReport validate_plan(const DeploymentPlan& plan, const NetworkTopology& topo,
                               const std::vector<ServiceSpec>& services);

ResourceUsage resource_usage(const DeploymentPlan& plan, const std::vector<ServiceSpec>& services);

// Usage on a single server.
ResourceUsage server_usage(const DeploymentPlan& plan, const std::vector<ServiceSpec>& services,
                           ServerIndex n);

// 1 where one more instance of `service` still fits (AI services only on HAC).
std::vector<std::uint8_t> availability_mask(const DeploymentPlan& plan, const NetworkTopology& topo,
                                            const std::vector<ServiceSpec>& services,
                                            ServiceIndex service);

}  // namespace edgeorch
