#pragma once

// Experiment orchestration: runs placement algorithms on one scenario or a
// sweep of generated scenarios across seeds, appending one ResultRow per run
// and writing per-run artifacts (plan, training log, checkpoint, DES report).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "edgeorch/baselines.hpp"
#include "edgeorch/event_sim.hpp"
#include "edgeorch/generator.hpp"
#include "edgeorch/policy.hpp"
#include "edgeorch/results.hpp"
#include "edgeorch/sil_gpo.hpp"

namespace edgeorch {
// Learner settings tied to a scenario scale. "paper" keeps the full-scale
// Hyperparams defaults; "desk" trades them for more updates per episode so a
// few hundred short episodes suffice.
struct TrainingProfile {
  Hyperparams hp;
  RewardConfig rewards;
  nn::ArchConfig arch;  // feature widths are filled in per scenario
  std::size_t episodes = 300;
};

// Throws ConfigError for unknown names.
TrainingProfile training_profile(const std::string& name);

inline const std::vector<std::string> kAlgorithms = {"random", "greedy", "genetic", "sil_gpo"};
// Throws ConfigError unless `name` is one of kAlgorithms.
void check_algorithm(const std::string& name);

struct RunOptions {
  TrainingProfile profile;
  GaConfig ga;
  bool simulate = false;  // also run the event simulator on the final plan
  SimConfig sim;
};

struct RunOutcome {
  ResultRow row;
  std::optional<DeploymentPlan> plan;  // empty when the algorithm failed
  std::string error;                   // failure message for flagged rows
};

// Runs one algorithm with one seed. Artifacts go to `run_dir` when it is
// non-empty. Algorithm failures are caught and reported in the outcome.
RunOutcome run_algorithm(const Scenario& scenario, const std::string& scenario_id, const std::string& algorithm,
                         std::uint64_t seed, const RunOptions& options, const std::filesystem::path& run_dir);

struct ExperimentSpec {
  std::string name = "experiment";
  std::optional<std::filesystem::path> scenario;  // config file; otherwise generated from `preset`
  std::string preset = "desk";
  std::uint64_t scenario_seed = 1;
  std::optional<SweepAxis> sweep;
  std::vector<std::string> algorithms = kAlgorithms;
  std::vector<std::uint64_t> seeds = {1};
  RunOptions options;

  void validate() const;
};

// Relative scenario paths resolve against `base_dir`. Throws ParseError or
// ConfigError.
ExperimentSpec experiment_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment(const std::filesystem::path& path);

// Writes <out>/results.csv, <out>/scenarios/<id>.json and
// <out>/runs/<id>/<algorithm>_seed<k>/. Returns the rows in run order.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                      const std::function<void(const RunOutcome&)>& on_run = {});

}  // namespace edgeorch
