#include "edgeorch/experiment.hpp"

#include <algorithm>
#include <chrono>

#include "edgeorch/checkpoint.hpp"
#include "edgeorch/delay.hpp"
#include "edgeorch/errors.hpp"
#include "edgeorch/scenario_io.hpp"
#include "json.hpp"

namespace edgeorch {

using nlohmann::json;

TrainingProfile training_profile(const std::string& name) {
  TrainingProfile p;
  if (name == "paper") return p;
  if (name == "desk") {
    p.hp.lr_actor = 1e-3;
    p.hp.lr_critic = 1e-3;
    p.hp.batch_size = 64;
    p.hp.mini_batch_size = 16;
    p.hp.k_epochs = 10;
    // Undiscounted: the episode return then telescopes to T(0) - T(final).
    p.hp.gamma = 1.0;
    p.rewards.t_penalty = 20.0;
    p.arch.hidden = 32;
    p.arch.trunk = 64;
    p.arch.heads = 2;
    return p;
  }
  throw ConfigError("unknown training profile '" + name + "' (expected paper or desk)");
}

void check_algorithm(const std::string& name) {
  if (std::find(kAlgorithms.begin(), kAlgorithms.end(), name) == kAlgorithms.end())
    throw ConfigError("unknown algorithm '" + name + "' (expected random, greedy, genetic or sil_gpo)");
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunOutcome run_algorithm(const Scenario& scenario, const std::string& scenario_id, const std::string& algorithm,
                         std::uint64_t seed, const RunOptions& options, const std::filesystem::path& run_dir) {
  check_algorithm(algorithm);
  RunOutcome out;
  out.row.scenario_id = scenario_id;
  out.row.algorithm = algorithm;
  out.row.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    DeploymentPlan plan;
    if (algorithm == "random") {
      plan = random_place(scenario, seed);
      out.row.episodes_or_evals = 1;
    } else if (algorithm == "greedy") {
      plan = greedy_aggregate(scenario);
      out.row.episodes_or_evals = 1;
    } else if (algorithm == "genetic") {
      auto cfg = options.ga;
      cfg.seed = seed;
      auto result = genetic_search(scenario, cfg);
      plan = std::move(result.plan);
      out.row.episodes_or_evals = result.evaluations;
    } else {
      const auto& prof = options.profile;
      auto arch = prof.arch;
      arch.deploy_features = arch.route_features = scenario.services.size();
      SilGpoTrainer trainer(scenario, prof.hp, prof.rewards, arch, seed);
      const auto log = trainer.train(prof.episodes);
      auto rollout = trainer.greedy_rollout();
      if (rollout.deadlocked) throw DeadlockError("greedy rollout of the trained policy deadlocked");
      plan = std::move(rollout.plan);
      out.row.episodes_or_evals = prof.episodes;
      if (!run_dir.empty()) {
        write_file(run_dir / "training.csv", log.to_csv(true));
        save_trainer(trainer, run_dir / "checkpoint.silgpo");
      }
    }
    const auto eval = evaluate_plan(scenario, plan);
    const auto usage = resource_usage(plan, scenario.services);
    if (eval.feasible) out.row.total_delay = eval.total;
    out.row.cpu_used = double(usage.cpu);
    out.row.gpu_used = double(usage.gpu);
    out.row.mem_used = usage.mem_gb;
    if (!eval.feasible) out.error = "plan leaves some request without a finite delay";
    if (!run_dir.empty()) {
      save_plan(plan, scenario, run_dir / "plan.json");
      if (options.simulate && eval.feasible) {
        auto sim = options.sim;
        sim.seed = seed;
        write_file(run_dir / "des.csv", simulate(scenario, plan, eval.routing, sim).to_csv());
      }
    }
    out.plan = std::move(plan);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    out.error = e.what();
    out.plan.reset();
  }
  out.row.wallclock_ms = elapsed_ms(t0);
  return out;
}

void ExperimentSpec::validate() const {
  if (name.empty() || name.find(',') != std::string::npos) throw ConfigError("experiment name must be non-empty, without commas");
  if (algorithms.empty()) throw ConfigError("experiment selects no algorithm");
  for (const auto& a : algorithms) check_algorithm(a);
  if (seeds.empty()) throw ConfigError("experiment lists no seed");
  if (sweep && scenario) throw ConfigError("a sweep needs a preset, not a scenario file");
  if (!scenario) edgeorch::preset(preset);
  options.profile.hp.validate();
  auto arch = options.profile.arch;
  arch.deploy_features = arch.route_features = 1;
  arch.validate();
  options.ga.validate();
  options.sim.validate();
  if (options.profile.episodes == 0) throw ConfigError("episodes must be positive");
}

namespace {

template <typename T>
void take(const json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + "." + key + ": wrong type");
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; }))
      throw ParseError(where + ": unknown field '" + item.key() + "'");
  }
}

}  // namespace

ExperimentSpec experiment_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment JSON: ") + e.what());
  }
  check_keys(root,
             {"name", "scenario", "preset", "scenario_seed", "sweep", "algorithms", "seeds", "profile", "episodes",
              "hyperparams", "rewards", "ga", "simulate", "sim"},
             "experiment");
  ExperimentSpec spec;
  take(root, "name", spec.name, "experiment");
  if (root.contains("scenario")) {
    std::string path;
    take(root, "scenario", path, "experiment");
    spec.scenario = std::filesystem::path(path).is_absolute() ? std::filesystem::path(path) : base_dir / path;
  }
  take(root, "preset", spec.preset, "experiment");
  take(root, "scenario_seed", spec.scenario_seed, "experiment");
  if (root.contains("sweep")) {
    std::string axis;
    take(root, "sweep", axis, "experiment");
    spec.sweep = parse_sweep_axis(axis);
  }
  take(root, "algorithms", spec.algorithms, "experiment");
  take(root, "seeds", spec.seeds, "experiment");

  std::string profile = spec.scenario ? "paper" : spec.preset;
  take(root, "profile", profile, "experiment");
  spec.options.profile = training_profile(profile);
  auto& prof = spec.options.profile;
  take(root, "episodes", prof.episodes, "experiment");
  if (root.contains("hyperparams")) {
    const auto& h = root["hyperparams"];
    check_keys(h,
               {"lr_actor", "lr_critic", "gamma", "gae_lambda", "clip_eps", "entropy_coef", "sil_coef",
                "high_return_ratio", "batch_size", "mini_batch_size", "k_epochs", "determining_sample_freq",
                "hr_capacity", "max_grad_norm", "normalize_advantages"},
               "hyperparams");
    auto& hp = prof.hp;
    take(h, "lr_actor", hp.lr_actor, "hyperparams");
    take(h, "lr_critic", hp.lr_critic, "hyperparams");
    take(h, "gamma", hp.gamma, "hyperparams");
    take(h, "gae_lambda", hp.gae_lambda, "hyperparams");
    take(h, "clip_eps", hp.clip_eps, "hyperparams");
    take(h, "entropy_coef", hp.entropy_coef, "hyperparams");
    take(h, "sil_coef", hp.sil_coef, "hyperparams");
    take(h, "high_return_ratio", hp.high_return_ratio, "hyperparams");
    take(h, "batch_size", hp.batch_size, "hyperparams");
    take(h, "mini_batch_size", hp.mini_batch_size, "hyperparams");
    take(h, "k_epochs", hp.k_epochs, "hyperparams");
    take(h, "determining_sample_freq", hp.determining_sample_freq, "hyperparams");
    take(h, "hr_capacity", hp.hr_capacity, "hyperparams");
    take(h, "max_grad_norm", hp.max_grad_norm, "hyperparams");
    take(h, "normalize_advantages", hp.normalize_advantages, "hyperparams");
  }
  if (root.contains("rewards")) {
    const auto& r = root["rewards"];
    check_keys(r, {"alpha1", "alpha2", "alpha3", "scaling_bonus", "t_penalty"}, "rewards");
    auto& rc = prof.rewards;
    take(r, "alpha1", rc.alpha1, "rewards");
    take(r, "alpha2", rc.alpha2, "rewards");
    take(r, "alpha3", rc.alpha3, "rewards");
    take(r, "scaling_bonus", rc.scaling_bonus, "rewards");
    if (r.contains("t_penalty")) {
      double v = 0.0;
      take(r, "t_penalty", v, "rewards");
      rc.t_penalty = v;
    }
  }
  if (root.contains("ga")) {
    const auto& g = root["ga"];
    check_keys(g, {"population", "generations", "crossover_rate", "mutation_rate", "local_search_steps", "tournament", "elites"},
               "ga");
    auto& ga = spec.options.ga;
    take(g, "population", ga.population, "ga");
    take(g, "generations", ga.generations, "ga");
    take(g, "crossover_rate", ga.crossover_rate, "ga");
    take(g, "mutation_rate", ga.mutation_rate, "ga");
    take(g, "local_search_steps", ga.local_search_steps, "ga");
    take(g, "tournament", ga.tournament, "ga");
    take(g, "elites", ga.elites, "ga");
  }
  take(root, "simulate", spec.options.simulate, "experiment");
  if (root.contains("sim")) {
    const auto& s = root["sim"];
    check_keys(s, {"horizon", "warmup_fraction", "batches"}, "sim");
    take(s, "horizon", spec.options.sim.horizon, "sim");
    take(s, "warmup_fraction", spec.options.sim.warmup_fraction, "sim");
    take(s, "batches", spec.options.sim.batches, "sim");
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  return experiment_from_json(read_file(path), path.parent_path());
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                      const std::function<void(const RunOutcome&)>& on_run) {
  spec.validate();
  std::vector<std::pair<std::string, Scenario>> scenarios;
  if (spec.scenario) {
    auto sc = load_scenario(*spec.scenario);
    scenarios.emplace_back(sc.name, std::move(sc));
  } else {
    const auto base = preset(spec.preset);
    std::vector<SweepPoint> points = spec.sweep ? sweep(base, *spec.sweep) : std::vector<SweepPoint>{{base.name, base}};
    for (auto& pt : points) scenarios.emplace_back(pt.label, generate_scenario(pt.params, spec.scenario_seed));
  }

  ResultWriter writer(out_dir / "results.csv");
  std::vector<ResultRow> rows;
  for (const auto& [id, sc] : scenarios) {
    save_scenario(sc, out_dir / "scenarios" / (id + ".json"));
    for (const auto& alg : spec.algorithms) {
      for (auto seed : spec.seeds) {
        const auto run_dir = out_dir / "runs" / id / (alg + "_seed" + std::to_string(seed));
        auto outcome = run_algorithm(sc, id, alg, seed, spec.options, run_dir);
        writer.append(outcome.row);
        if (!outcome.error.empty()) write_file(run_dir / "error.txt", outcome.error + "\n");
        if (on_run) on_run(outcome);
        rows.push_back(std::move(outcome.row));
      }
    }
  }
  return rows;
}

}  // namespace edgeorch
