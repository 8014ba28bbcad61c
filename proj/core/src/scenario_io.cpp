#include "edgeorch/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include "edgeorch/errors.hpp"
#include "edgeorch/llm_cost.hpp"
#include "json.hpp"

namespace edgeorch {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, where);
}

std::int64_t integer(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t integer_or(const json& obj, const char* key, std::int64_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return integer(obj, key, where);
}

std::string text(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_string()) throw ParseError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

const json& array(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_array()) throw ParseError(where + "." + key + ": expected an array");
  return v;
}

LlmProfile parse_llm(const json& j, const std::string& where) {
  LlmProfile p;
  p.hidden_dim = integer(j, "hidden_dim", where);
  p.n_heads = integer(j, "n_heads", where);
  p.n_kv_groups = integer(j, "n_kv_groups", where);
  p.ffn_multiplier = number(j, "ffn_multiplier", where);
  p.n_layers = integer(j, "n_layers", where);
  p.seq_in = integer(j, "seq_in", where);
  p.seq_out = integer(j, "seq_out", where);
  p.validate();
  return p;
}

ServiceSpec parse_service(const json& j, const std::string& where) {
  ServiceSpec s;
  s.id = text(j, "id", where);
  const auto kind = text(j, "kind", where);
  if (kind == "micro") {
    s.kind = ServiceKind::micro;
  } else if (kind == "ai") {
    s.kind = ServiceKind::ai;
  } else {
    throw ParseError(where + ".kind: expected \"micro\" or \"ai\"");
  }
  s.cpu_req = int(integer(j, "cpu", where));
  s.gpu_req = int(integer_or(j, "gpu", 0, where));
  s.output_size_mb = number(j, "output_mb", where);
  if (j.contains("llm")) {
    if (s.kind != ServiceKind::ai) throw ParseError(where + ".llm: only AI services carry a model profile");
    const auto profile = parse_llm(j["llm"], where + ".llm");
    const double flops = number(j, "gpu_flops", where);
    if (!(flops > 0.0)) throw ConfigError(where + ".gpu_flops must be positive");
    s.proc_rate = ai_service_rate(profile, GpuProfile{flops});
    s.mem_req_gb = j.contains("mem_gb")
                       ? number(j, "mem_gb", where)
                       : ai_service_memory(profile, number_or(j, "bytes_per_param", kDefaultBytesPerParam, where))
                             .total_gb();
  } else {
    s.proc_rate = number(j, "rate", where);
    s.mem_req_gb = number(j, "mem_gb", where);
  }
  return s;
}

ServerIndex server_ref(const NetworkTopology& topo, const std::string& id, const std::string& where) {
  auto n = topo.find(id);
  if (!n) throw ParseError(where + ": unknown server '" + id + "'");
  return *n;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + path.string());
}

Scenario scenario_from_json(const std::string& content) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  const std::string top = "scenario";
  Scenario sc;
  sc.name = root.contains("name") ? text(root, "name", top) : "scenario";
  sc.seed = std::uint64_t(integer_or(root, "seed", 0, top));
  if (root.contains("settings")) {
    const auto& st = root["settings"];
    sc.settings.t_penalty = number_or(st, "t_penalty", sc.settings.t_penalty, "settings");
    sc.settings.rho_target = number_or(st, "rho_target", sc.settings.rho_target, "settings");
  }

  std::vector<ServerNode> nodes;
  const auto& servers = array(root, "servers", top);
  for (std::size_t i = 0; i < servers.size(); ++i) {
    const std::string where = "servers[" + std::to_string(i) + "]";
    const auto& j = servers[i];
    ServerNode n;
    n.id = text(j, "id", where);
    const auto kind = text(j, "kind", where);
    if (kind == "ucs") {
      n.kind = ServerKind::ucs;
    } else if (kind == "hac") {
      n.kind = ServerKind::hac;
    } else {
      throw ParseError(where + ".kind: expected \"ucs\" or \"hac\"");
    }
    n.cpu_capacity = int(integer(j, "cpu", where));
    n.gpu_capacity = int(integer_or(j, "gpu", 0, where));
    n.mem_capacity_gb = number(j, "mem_gb", where);
    n.access_bandwidth_gbps = number(j, "bandwidth_gbps", where);
    nodes.push_back(std::move(n));
  }
  sc.topology = NetworkTopology(std::move(nodes));

  if (root.contains("links")) {
    const auto& links = array(root, "links", top);
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::string where = "links[" + std::to_string(i) + "]";
      const auto a = server_ref(sc.topology, text(links[i], "a", where), where);
      const auto b = server_ref(sc.topology, text(links[i], "b", where), where);
      try {
        sc.topology.add_link(a, b, number(links[i], "bandwidth_gbps", where));
      } catch (const StructuralError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
  }

  const auto& services = array(root, "services", top);
  for (std::size_t i = 0; i < services.size(); ++i)
    sc.services.push_back(parse_service(services[i], "services[" + std::to_string(i) + "]"));

  const auto& requests = array(root, "requests", top);
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const std::string where = "requests[" + std::to_string(i) + "]";
    const auto& j = requests[i];
    RequestClass r;
    r.id = text(j, "id", where);
    for (const auto& sid : array(j, "chain", where)) {
      if (!sid.is_string()) throw ParseError(where + ".chain: expected service ids");
      const auto name = sid.get<std::string>();
      std::size_t s = 0;
      while (s < sc.services.size() && sc.services[s].id != name) ++s;
      if (s == sc.services.size()) throw ParseError(where + ".chain: unknown service '" + name + "'");
      r.chain.push_back(s);
    }
    r.entry_server = server_ref(sc.topology, text(j, "entry", where), where + ".entry");
    r.arrival_rate = number(j, "arrival_rate", where);
    r.payload_mb = number(j, "payload_mb", where);
    r.result_mb = number(j, "result_mb", where);
    if (j.contains("access_bandwidth_gbps")) r.access_bandwidth_gbps = number(j, "access_bandwidth_gbps", where);
    sc.requests.push_back(std::move(r));
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_file(path)); }

std::string scenario_to_json(const Scenario& sc) {
  json root;
  root["name"] = sc.name;
  root["seed"] = sc.seed;
  root["settings"] = {{"t_penalty", sc.settings.t_penalty}, {"rho_target", sc.settings.rho_target}};
  json servers = json::array();
  for (const auto& n : sc.topology.nodes()) {
    servers.push_back({{"id", n.id},
                       {"kind", n.kind == ServerKind::ucs ? "ucs" : "hac"},
                       {"cpu", n.cpu_capacity},
                       {"gpu", n.gpu_capacity},
                       {"mem_gb", n.mem_capacity_gb},
                       {"bandwidth_gbps", n.access_bandwidth_gbps}});
  }
  root["servers"] = servers;
  json links = json::array();
  const auto& nodes = sc.topology.nodes();
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (sc.topology.linked(a, b))
        links.push_back({{"a", nodes[a].id}, {"b", nodes[b].id}, {"bandwidth_gbps", sc.topology.bandwidth(a, b)}});
  root["links"] = links;
  json services = json::array();
  for (const auto& s : sc.services) {
    services.push_back({{"id", s.id},
                        {"kind", s.kind == ServiceKind::micro ? "micro" : "ai"},
                        {"cpu", s.cpu_req},
                        {"gpu", s.gpu_req},
                        {"mem_gb", s.mem_req_gb},
                        {"output_mb", s.output_size_mb},
                        {"rate", s.proc_rate}});
  }
  root["services"] = services;
  json requests = json::array();
  for (const auto& r : sc.requests) {
    json chain = json::array();
    for (auto s : r.chain) chain.push_back(sc.services[s].id);
    json j = {{"id", r.id},
              {"chain", chain},
              {"entry", nodes[r.entry_server].id},
              {"arrival_rate", r.arrival_rate},
              {"payload_mb", r.payload_mb},
              {"result_mb", r.result_mb}};
    if (r.access_bandwidth_gbps) j["access_bandwidth_gbps"] = *r.access_bandwidth_gbps;
    requests.push_back(j);
  }
  root["requests"] = requests;
  return root.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  write_file(path, scenario_to_json(scenario));
}

DeploymentPlan plan_from_json(const std::string& content, const Scenario& sc) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("plan JSON: ") + e.what());
  }
  const auto& rows = root.is_array() ? root : array(root, "counts", "plan");
  const std::size_t N = sc.topology.size(), S = sc.services.size();
  if (root.is_object() && root.contains("servers")) {
    const auto& ids = array(root, "servers", "plan");
    if (ids.size() != N) throw ParseError("plan.servers: expected " + std::to_string(N) + " entries");
    for (std::size_t n = 0; n < N; ++n)
      if (!ids[n].is_string() || ids[n].get<std::string>() != sc.topology.node(n).id)
        throw ParseError("plan.servers[" + std::to_string(n) + "] does not match the scenario");
  }
  if (root.is_object() && root.contains("services")) {
    const auto& ids = array(root, "services", "plan");
    if (ids.size() != S) throw ParseError("plan.services: expected " + std::to_string(S) + " entries");
    for (std::size_t s = 0; s < S; ++s)
      if (!ids[s].is_string() || ids[s].get<std::string>() != sc.services[s].id)
        throw ParseError("plan.services[" + std::to_string(s) + "] does not match the scenario");
  }
  if (rows.size() != N) throw ParseError("plan.counts: expected " + std::to_string(N) + " rows");
  DeploymentPlan plan(N, S);
  for (std::size_t n = 0; n < N; ++n) {
    if (!rows[n].is_array() || rows[n].size() != S)
      throw ParseError("plan.counts[" + std::to_string(n) + "]: expected " + std::to_string(S) + " counts");
    for (std::size_t s = 0; s < S; ++s) {
      const auto& v = rows[n][s];
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ParseError("plan.counts[" + std::to_string(n) + "][" + std::to_string(s) + "]: expected a count");
      plan.set(n, s, int(v.get<long long>()));
    }
  }
  return plan;
}

DeploymentPlan load_plan(const std::filesystem::path& path, const Scenario& scenario) {
  return plan_from_json(read_file(path), scenario);
}

std::string plan_to_json(const DeploymentPlan& plan, const Scenario& sc) {
  json root;
  json servers = json::array(), services = json::array(), counts = json::array();
  for (const auto& n : sc.topology.nodes()) servers.push_back(n.id);
  for (const auto& s : sc.services) services.push_back(s.id);
  for (std::size_t n = 0; n < plan.servers(); ++n) counts.push_back(plan.row(n));
  root["servers"] = servers;
  root["services"] = services;
  root["counts"] = counts;
  return root.dump(2) + "\n";
}

void save_plan(const DeploymentPlan& plan, const Scenario& scenario, const std::filesystem::path& path) {
  write_file(path, plan_to_json(plan, scenario));
}

}  // namespace edgeorch
