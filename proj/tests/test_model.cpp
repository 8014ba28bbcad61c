#include "doctest.h"
#include "edgeorch/errors.hpp"
#include "edgeorch/model.hpp"
#include "oracles.hpp"

using namespace edgeorch;
using test::server;
using test::service;

namespace {

Scenario two_tier() {
  Scenario sc;
  sc.name = "two-tier";
  sc.topology = test::mesh({server("u0", ServerKind::ucs, 4, 0, 40, 2.0), server("h0", ServerKind::hac, 8, 2, 160, 5.0)},
                           3.0);
  sc.services = {service("m", ServiceKind::micro, 1, 0, 13, 100, 8), service("a", ServiceKind::ai, 3, 1, 65, 300, 20)};
  sc.requests = {test::request("r0", {0, 1}, 0, 2.0)};
  return sc;
}

}  // namespace

TEST_CASE("topology links are symmetric with implicit self loops") {
  auto topo = test::mesh({server("a", ServerKind::ucs, 1, 0, 1, 1), server("b", ServerKind::ucs, 1, 0, 1, 1),
                          server("c", ServerKind::ucs, 1, 0, 1, 1)},
                         2.0);
  CHECK(topo.linked(0, 1));
  CHECK(topo.linked(1, 0));
  CHECK(topo.bandwidth(2, 0) == 2.0);
  CHECK(topo.adjacent(1, 1));
  CHECK_FALSE(topo.linked(1, 1));
  CHECK(topo.link_count() == 3);
  CHECK(topo.find("c") == std::optional<ServerIndex>(2));
  CHECK_FALSE(topo.find("zz").has_value());
  CHECK_THROWS_AS(topo.add_link(0, 0, 1.0), StructuralError);
  CHECK_THROWS_AS(topo.add_link(0, 5, 1.0), StructuralError);
  CHECK_THROWS_AS(topo.add_link(0, 1, 0.0), StructuralError);
}

TEST_CASE("plan counts and resource usage") {
  const auto sc = two_tier();
  DeploymentPlan plan(2, 2);
  plan.add(0, 0, 2);
  plan.add(1, 0);
  plan.add(1, 1);
  CHECK(plan.total() == 4);
  CHECK(plan.service_total(0) == 3);
  CHECK(plan.row(1) == std::vector<int>{1, 1});
  const auto all = resource_usage(plan, sc.services);
  CHECK(all.cpu == 6);
  CHECK(all.gpu == 1);
  CHECK(all.mem_gb == doctest::Approx(3 * 13 + 65));
  const auto h = server_usage(plan, sc.services, 1);
  CHECK(h.cpu == 4);
  CHECK(validate_plan(plan, sc.topology, sc.services).feasible);
  CHECK_THROWS_AS(plan.set(0, 0, -1), ContractViolation);
  CHECK_THROWS_AS(plan.add(2, 0), StructuralError);
}

TEST_CASE("constraint violations are itemised") {
  const auto sc = two_tier();
  DeploymentPlan plan(2, 2);
  plan.add(0, 1);  // AI on UCS: cpu 3 fits, but no GPU and wrong kind
  plan.add(0, 0, 4);
  const auto report = validate_plan(plan, sc.topology, sc.services);
  CHECK_FALSE(report.feasible);
  bool cpu = false, gpu = false, kind = false, mem = false;
  for (const auto& v : report.violations) {
    cpu = cpu || v.resource == Resource::cpu;
    gpu = gpu || v.resource == Resource::gpu;
    kind = kind || v.resource == Resource::gpu_kind;
    mem = mem || v.resource == Resource::mem;
  }
  CHECK(cpu);
  CHECK(gpu);
  CHECK(kind);
  CHECK(mem);
  CHECK_THROWS_AS(validate_plan(DeploymentPlan(3, 2), sc.topology, sc.services), StructuralError);
}

TEST_CASE("availability mask respects capacity and server kind") {
  const auto sc = two_tier();
  DeploymentPlan plan(2, 2);
  CHECK(availability_mask(plan, sc.topology, sc.services, 1) == std::vector<std::uint8_t>{0, 1});
  CHECK(availability_mask(plan, sc.topology, sc.services, 0) == std::vector<std::uint8_t>{1, 1});
  plan.add(1, 1, 2);  // both GPUs taken
  CHECK(availability_mask(plan, sc.topology, sc.services, 1) == std::vector<std::uint8_t>{0, 0});
  plan.add(0, 0, 3);  // 39 GB of 40
  CHECK(availability_mask(plan, sc.topology, sc.services, 0)[0] == 0);
}

TEST_CASE("scenario validation") {
  auto sc = two_tier();
  CHECK_NOTHROW(sc.validate());
  CHECK(sc.access_bandwidth(0) == 2.0);
  sc.requests[0].access_bandwidth_gbps = 1.5;
  CHECK(sc.access_bandwidth(0) == 1.5);

  auto bad = two_tier();
  bad.requests[0].chain = {0, 7};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = two_tier();
  bad.services[0].gpu_req = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = two_tier();
  bad.requests.push_back(bad.requests[0]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = two_tier();
  bad.settings.rho_target = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = two_tier();
  bad.requests[0].chain.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
