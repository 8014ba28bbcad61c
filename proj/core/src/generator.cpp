#include "edgeorch/generator.hpp"

#include <algorithm>
#include <numeric>

#include "edgeorch/env.hpp"
#include "edgeorch/errors.hpp"
#include "edgeorch/random.hpp"

namespace edgeorch {

namespace {

void check_range(const Range& r, const std::string& what, bool positive = true) {
  if (!(r.first <= r.second)) throw ConfigError(what + " range is inverted");
  if (positive && !(r.first > 0.0)) throw ConfigError(what + " must be positive");
}

void check_range(const IntRange& r, const std::string& what, int lowest) {
  if (r.first > r.second) throw ConfigError(what + " range is inverted");
  if (r.first < lowest) throw ConfigError(what + " must be at least " + std::to_string(lowest));
}

std::string label(const Range& r) {
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    return s;
  };
  return fmt(r.first) + "-" + fmt(r.second);
}

}  // namespace

void GeneratorParams::validate() const {
  if (ucs.count < 0 || hac.count < 0 || ucs.count + hac.count == 0) throw ConfigError("generator needs servers");
  for (const auto* g : {&ucs, &hac}) {
    if (g->count == 0) continue;
    if (g->cpu <= 0 || !(g->mem_gb > 0.0)) throw ConfigError("server capacities must be positive");
    check_range(g->bandwidth_gbps, "server bandwidth");
    check_range(g->gpu, "server GPU count", 0);
  }
  if (ucs.gpu.second != 0) throw ConfigError("UCS servers carry no GPUs");
  if (!(link_probability >= 0.0 && link_probability <= 1.0)) throw ConfigError("link probability must lie in [0, 1]");
  if (micro.count < 0 || ai.count < 0 || micro.count + ai.count == 0) throw ConfigError("generator needs services");
  for (const auto* g : {&micro, &ai}) {
    if (g->count == 0) continue;
    if (g->cpu <= 0 || !(g->mem_gb > 0.0) || g->gpu < 0 || g->output_mb < 0.0)
      throw ConfigError("service demands must be positive");
    check_range(g->rate, "service rate");
  }
  if (micro.gpu != 0) throw ConfigError("microservices use no GPU");
  if (ai_requests < 0 || common_requests < 0 || ai_requests + common_requests == 0)
    throw ConfigError("generator needs requests");
  check_range(chain_length, "chain length", 1);
  check_range(arrival_rate, "arrival rate");
  if (common_requests > 0 && chain_length.first > micro.count)
    throw ConfigError("common chains are longer than the microservice catalog");
  if (ai_requests > 0) {
    if (ai.count == 0) throw ConfigError("AI requests need an AI service");
    if (max_ai_per_chain < 1) throw ConfigError("AI chains need at least one AI service");
    if (chain_length.first > micro.count + std::min(max_ai_per_chain, ai.count))
      throw ConfigError("AI chains are longer than the catalog allows");
    if (hac.count == 0) throw ConfigError("AI services need HAC servers");
  }
  if (payload_mb < 0.0 || result_mb < 0.0) throw ConfigError("payload sizes must be non-negative");
}

GeneratorParams paper_preset() { return GeneratorParams{}; }

GeneratorParams desk_preset() {
  GeneratorParams p;
  p.name = "desk";
  p.ucs = {3, 6, {0, 0}, 80.0, {2.0, 3.0}};
  p.hac = {1, 8, {2, 2}, 160.0, {4.0, 6.0}};
  p.link_probability = 1.0;
  p.micro.count = 3;
  p.ai.count = 1;
  p.ai_requests = 2;
  p.common_requests = 4;
  p.chain_length = {2, 3};
  return p;
}

GeneratorParams preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

Scenario generate_scenario(const GeneratorParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);

  std::vector<ServerNode> nodes;
  auto add_servers = [&](const ServerGroupParams& g, ServerKind kind, const char* prefix) {
    for (int i = 0; i < g.count; ++i) {
      ServerNode n;
      n.id = prefix + std::to_string(i);
      n.kind = kind;
      n.cpu_capacity = g.cpu;
      n.gpu_capacity = int(rng.uniform_int(g.gpu.first, g.gpu.second));
      n.mem_capacity_gb = g.mem_gb;
      n.access_bandwidth_gbps = rng.uniform(g.bandwidth_gbps.first, g.bandwidth_gbps.second);
      nodes.push_back(std::move(n));
    }
  };
  add_servers(p.ucs, ServerKind::ucs, "ucs");
  add_servers(p.hac, ServerKind::hac, "hac");

  Scenario sc;
  sc.name = p.name;
  sc.seed = seed;
  sc.settings = p.settings;
  sc.topology = NetworkTopology(std::move(nodes));
  const std::size_t N = sc.topology.size();

  // A random spanning path keeps the graph connected; other pairs link with
  // the given probability. A link runs at the slower endpoint's bandwidth.
  std::vector<ServerIndex> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  auto link = [&](ServerIndex a, ServerIndex b) {
    const double bw = std::min(sc.topology.node(a).access_bandwidth_gbps, sc.topology.node(b).access_bandwidth_gbps);
    sc.topology.add_link(a, b, bw);
  };
  for (std::size_t i = 1; i < N; ++i) link(order[i - 1], order[i]);
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = a + 1; b < N; ++b)
      if (!sc.topology.linked(a, b) && rng.bernoulli(p.link_probability)) link(a, b);

  auto add_services = [&](const ServiceGroupParams& g, ServiceKind kind, const char* prefix) {
    for (int i = 0; i < g.count; ++i) {
      ServiceSpec s;
      s.id = prefix + std::to_string(i);
      s.kind = kind;
      s.cpu_req = g.cpu;
      s.gpu_req = g.gpu;
      s.mem_req_gb = g.mem_gb;
      s.output_size_mb = g.output_mb;
      s.proc_rate = rng.uniform(g.rate.first, g.rate.second);
      sc.services.push_back(std::move(s));
    }
  };
  add_services(p.micro, ServiceKind::micro, "ms");
  add_services(p.ai, ServiceKind::ai, "ai");

  std::vector<ServiceIndex> micro_ids(std::size_t(p.micro.count)), ai_ids(std::size_t(p.ai.count));
  std::iota(micro_ids.begin(), micro_ids.end(), 0);
  std::iota(ai_ids.begin(), ai_ids.end(), std::size_t(p.micro.count));
  auto draw = [&](std::vector<ServiceIndex> pool, int k) {
    for (int i = 0; i < k; ++i) std::swap(pool[std::size_t(i)], pool[std::size_t(i) + rng.index(pool.size() - std::size_t(i))]);
    pool.resize(std::size_t(k));
    return pool;
  };

  const int total_requests = p.ai_requests + p.common_requests;
  for (int r = 0; r < total_requests; ++r) {
    const bool is_ai = r < p.ai_requests;
    RequestClass req;
    req.id = (is_ai ? "air" : "req") + std::to_string(is_ai ? r : r - p.ai_requests);
    std::vector<ServiceIndex> chain;
    if (is_ai) {
      const int most = std::min({p.max_ai_per_chain, p.ai.count, p.chain_length.second});
      const int hi = std::min(p.chain_length.second, p.micro.count + most);
      const int len = int(rng.uniform_int(p.chain_length.first, hi));
      const int k_lo = std::max(1, len - p.micro.count);
      const int k = int(rng.uniform_int(k_lo, std::min(most, len)));
      chain = draw(micro_ids, len - k);
      for (auto s : draw(ai_ids, k)) chain.push_back(s);
      for (std::size_t i = chain.size(); i > 1; --i) std::swap(chain[i - 1], chain[rng.index(i)]);
    } else {
      const int len = int(rng.uniform_int(p.chain_length.first, std::min(p.chain_length.second, p.micro.count)));
      chain = draw(micro_ids, len);
    }
    req.chain = std::move(chain);
    req.entry_server = rng.index(N);
    req.arrival_rate = rng.uniform(p.arrival_rate.first, p.arrival_rate.second);
    req.payload_mb = p.payload_mb;
    req.result_mb = p.result_mb;
    sc.requests.push_back(std::move(req));
  }

  sc.validate();
  check_budget_capacity(sc, instance_budget(sc));
  return sc;
}

std::vector<SweepPoint> sweep(const GeneratorParams& base, SweepAxis axis) {
  std::vector<SweepPoint> out;
  switch (axis) {
    case SweepAxis::arrival_rate:
      for (int lo = 1; lo <= 5; ++lo) {
        auto p = base;
        p.arrival_rate = {double(lo), double(lo + 1)};
        out.push_back({"rate" + label(p.arrival_rate), p});
      }
      break;
    case SweepAxis::chain_length:
      for (int lo = 3; lo <= 7; ++lo) {
        auto p = base;
        p.chain_length = {lo, lo + 2};
        out.push_back({"chain" + std::to_string(lo) + "-" + std::to_string(lo + 2), p});
      }
      break;
    case SweepAxis::request_count:
      for (int total = 20; total <= 60; total += 10) {
        auto p = base;
        const int base_total = base.ai_requests + base.common_requests;
        p.ai_requests = int(double(total) * double(base.ai_requests) / double(base_total) + 0.5);
        p.common_requests = total - p.ai_requests;
        out.push_back({"requests" + std::to_string(total), p});
      }
      break;
  }
  return out;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "arrival_rate") return SweepAxis::arrival_rate;
  if (name == "chain_length") return SweepAxis::chain_length;
  if (name == "request_count") return SweepAxis::request_count;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

}  // namespace edgeorch
