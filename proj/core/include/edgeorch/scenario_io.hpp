#pragma once

// JSON scenario configuration. The layout is described by
// docs/scenario.schema.json; parse errors name the offending field.
//
// AI services may give an "llm" profile plus "gpu_flops" instead of an
// explicit "rate"; the rate (and, when "mem_gb" is omitted, the memory
// demand) is then derived from the inference cost model.

#include <filesystem>
#include <string>

#include "edgeorch/model.hpp"

namespace edgeorch {

// Throws ParseError for malformed JSON or missing/mistyped fields and
// ConfigError when the resulting scenario breaks a model invariant.
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

// Canonical text: sorted keys, two-space indent, trailing newline.
std::string scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

// Plan files: {"servers": [...ids], "services": [...ids], "counts": [[...], ...]}
// with one row per server.
DeploymentPlan plan_from_json(const std::string& text, const Scenario& scenario);
DeploymentPlan load_plan(const std::filesystem::path& path, const Scenario& scenario);
std::string plan_to_json(const DeploymentPlan& plan, const Scenario& scenario);
void save_plan(const DeploymentPlan& plan, const Scenario& scenario, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace edgeorch
