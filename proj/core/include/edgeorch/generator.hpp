#pragma once

// Seeded synthetic scenarios. The default parameters give the full-scale
// edge cluster (7 UCS + 3 HAC servers, 12 micro + 3 AI services, 30
// requests); the desk preset is a small instance that trains in minutes.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "edgeorch/model.hpp"

namespace edgeorch {

using Range = std::pair<double, double>;
using IntRange = std::pair<int, int>;

struct ServerGroupParams {
  int count = 0;
  int cpu = 0;
  IntRange gpu{0, 0};
  double mem_gb = 0.0;
  Range bandwidth_gbps{1.0, 1.0};
};

struct ServiceGroupParams {
  int count = 0;
  int cpu = 0;
  int gpu = 0;
  double mem_gb = 0.0;
  double output_mb = 0.0;
  Range rate{1.0, 1.0};
};

struct GeneratorParams {
  std::string name = "paper";
  ServerGroupParams ucs{7, 20, {0, 0}, 250.0, {2.0, 3.0}};
  ServerGroupParams hac{3, 30, {5, 6}, 500.0, {4.0, 6.0}};
  double link_probability = 0.4;  // extra links on top of a spanning path; 1 meshes fully
  ServiceGroupParams micro{12, 1, 0, 13.0, 100.0, {7.0, 10.0}};
  ServiceGroupParams ai{3, 3, 1, 65.0, 300.0, {15.0, 25.0}};
  int ai_requests = 10;
  int common_requests = 20;
  IntRange chain_length{4, 7};
  Range arrival_rate{2.0, 4.0};
  int max_ai_per_chain = 2;
  double payload_mb = 10.0;
  double result_mb = 10.0;
  ScenarioSettings settings;

  // Throws ConfigError for empty groups, inverted ranges or chains that
  // cannot be drawn from the catalog.
  void validate() const;
};

GeneratorParams paper_preset();
GeneratorParams desk_preset();
// Throws ConfigError for names other than "paper" and "desk".
GeneratorParams preset(const std::string& name);

// Deterministic in (params, seed). Throws SetupError when the budgeted
// instances cannot fit the cluster.
Scenario generate_scenario(const GeneratorParams& params, std::uint64_t seed);

// Per-axis variants of a base parameter set.
enum class SweepAxis { arrival_rate, chain_length, request_count };

struct SweepPoint {
  std::string label;
  GeneratorParams params;
};

std::vector<SweepPoint> sweep(const GeneratorParams& base, SweepAxis axis);
// "arrival_rate", "chain_length" or "request_count"; throws ConfigError otherwise.
SweepAxis parse_sweep_axis(const std::string& name);

}  // namespace edgeorch
