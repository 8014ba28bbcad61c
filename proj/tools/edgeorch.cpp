// edgeorch command line: scenario generation, plan scoring, training,
// baselines, queue validation, experiments and plots.
//
// Exit codes: 0 success, 1 infeasible or failed run, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "edgeorch/baselines.hpp"
#include "edgeorch/checkpoint.hpp"
#include "edgeorch/delay.hpp"
#include "edgeorch/errors.hpp"
#include "edgeorch/event_sim.hpp"
#include "edgeorch/experiment.hpp"
#include "edgeorch/generator.hpp"
#include "edgeorch/plot.hpp"
#include "edgeorch/results.hpp"
#include "edgeorch/scenario_io.hpp"
#include "edgeorch/sil_gpo.hpp"

namespace fs = std::filesystem;
using namespace edgeorch;

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kConfigError = 2;

struct ScenarioSource {
  std::string config;
  std::string preset = "desk";
  std::uint64_t scenario_seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "scenario JSON file");
    cmd->add_option("--preset", preset, "generated scenario when no --config is given")
        ->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--scenario-seed", scenario_seed, "seed for the generated scenario");
  }

  Scenario load() const {
    if (!config.empty()) return load_scenario(config);
    return generate_scenario(edgeorch::preset(preset), scenario_seed);
  }

  std::string id(const Scenario& sc) const { return sc.name; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void print_plan_summary(const Scenario& sc, const DeploymentPlan& plan) {
  const auto eval = evaluate_plan(sc, plan);
  const auto usage = resource_usage(plan, sc.services);
  std::cout << "total_delay " << (eval.feasible ? fmt(eval.total) : std::string("infeasible")) << "\n"
            << "cpu_used " << usage.cpu << "\n"
            << "gpu_used " << usage.gpu << "\n"
            << "mem_used " << fmt(usage.mem_gb) << "\n";
}

int cmd_gen(const std::string& preset_name, std::uint64_t seed, const std::string& out, const std::string& axis) {
  const auto base = preset(preset_name);
  if (axis.empty()) {
    const auto text = scenario_to_json(generate_scenario(base, seed));
    if (out.empty()) {
      std::cout << text;
    } else {
      write_file(out, text);
    }
    return kOk;
  }
  if (out.empty()) throw ConfigError("a sweep needs --out as the target directory");
  for (const auto& pt : sweep(base, parse_sweep_axis(axis))) {
    auto sc = generate_scenario(pt.params, seed);
    sc.name = pt.label;
    const auto path = fs::path(out) / (pt.label + ".json");
    save_scenario(sc, path);
    std::cout << path.string() << "\n";
  }
  return kOk;
}

int cmd_eval(const ScenarioSource& src, const std::string& plan_path, bool des, std::uint64_t seed,
             const std::string& out) {
  const auto sc = src.load();
  const auto plan = load_plan(plan_path, sc);
  const auto report = validate_plan(plan, sc.topology, sc.services);
  if (!report.feasible) {
    std::cerr << "plan violates " << report.violations.size() << " resource constraint(s)\n";
    return kInfeasible;
  }
  const auto eval = evaluate_plan(sc, plan);
  print_plan_summary(sc, plan);
  std::string csv = "request,delay\n";
  for (std::size_t r = 0; r < eval.requests.size(); ++r) {
    const auto& d = eval.requests[r];
    csv += sc.requests[r].id + "," + (is_feasible(d) ? fmt(delay_value(d)) : std::string("infeasible")) + "\n";
  }
  if (!out.empty()) {
    write_file(fs::path(out) / "delays.csv", csv);
    if (des) {
      SimConfig cfg;
      cfg.seed = seed;
      write_file(fs::path(out) / "des.csv", simulate(sc, plan, eval.routing, cfg).to_csv());
    }
  } else {
    std::cout << csv;
  }
  return eval.feasible ? kOk : kInfeasible;
}

int cmd_train(const ScenarioSource& src, const std::string& profile_name, std::uint64_t seed,
              std::optional<std::size_t> episodes, const std::string& out, const std::string& init) {
  const auto sc = src.load();
  auto prof = training_profile(profile_name.empty() ? (src.config.empty() ? src.preset : "paper") : profile_name);
  if (episodes) prof.episodes = *episodes;
  auto arch = prof.arch;
  arch.deploy_features = arch.route_features = sc.services.size();
  SilGpoTrainer trainer(sc, prof.hp, prof.rewards, arch, seed);
  if (!init.empty()) restore_trainer(trainer, load_checkpoint(init));
  const auto log = trainer.train(prof.episodes, [](const EpisodeLog& e) {
    if (e.greedy) std::cerr << "episode " << e.episode << " greedy total_delay " << fmt(e.total_delay) << "\n";
  });
  const auto rollout = trainer.greedy_rollout();
  if (!out.empty()) {
    write_file(fs::path(out) / "training.csv", log.to_csv(true));
    save_trainer(trainer, fs::path(out) / "checkpoint.silgpo");
    save_plan(rollout.plan, sc, fs::path(out) / "plan.json");
  }
  if (rollout.deadlocked) {
    std::cerr << "greedy rollout deadlocked\n";
    return kInfeasible;
  }
  print_plan_summary(sc, rollout.plan);
  return evaluate_plan(sc, rollout.plan).feasible ? kOk : kInfeasible;
}

int cmd_baseline(const ScenarioSource& src, const std::string& algo, std::uint64_t seed, const std::string& out) {
  const auto sc = src.load();
  std::vector<std::string> algos;
  if (algo == "all") {
    algos = {"random", "greedy", "genetic"};
  } else {
    check_algorithm(algo);
    if (algo == "sil_gpo") throw ConfigError("use the train subcommand for sil_gpo");
    algos = {algo};
  }
  std::optional<ResultWriter> writer;
  if (!out.empty()) writer.emplace(fs::path(out) / "results.csv");
  bool all_ok = true;
  RunOptions options;
  for (const auto& a : algos) {
    const auto run_dir = out.empty() ? fs::path() : fs::path(out) / (a + "_seed" + std::to_string(seed));
    const auto outcome = run_algorithm(sc, src.id(sc), a, seed, options, run_dir);
    if (writer) writer->append(outcome.row);
    std::cout << format_row(outcome.row) << "\n";
    if (!outcome.error.empty()) std::cerr << a << ": " << outcome.error << "\n";
    all_ok = all_ok && outcome.row.total_delay.has_value();
  }
  return all_ok ? kOk : kInfeasible;
}

int cmd_validate_queue(const ScenarioSource& src, const std::string& plan_path, std::uint64_t seed,
                       std::uint64_t horizon, double rel_tol, const std::string& out) {
  const auto sc = src.load();
  const auto plan = plan_path.empty() ? greedy_aggregate(sc) : load_plan(plan_path, sc);
  const auto eval = evaluate_plan(sc, plan);
  SimConfig cfg;
  cfg.seed = seed;
  cfg.horizon = horizon;
  const auto report = simulate(sc, plan, eval.routing, cfg);
  const auto verdicts = compare(eval.requests, report, rel_tol);
  bool all = true;
  std::cout << "request,analytic,empirical,ci_half_width,pass\n";
  for (const auto& v : verdicts) {
    std::cout << v.request << "," << (v.analytic_feasible ? fmt(v.analytic) : std::string("infeasible")) << ","
              << fmt(v.empirical) << "," << fmt(v.ci_half_width) << "," << (v.pass ? "yes" : "no") << "\n";
    all = all && v.pass;
  }
  if (!out.empty()) write_file(fs::path(out) / "des.csv", report.to_csv());
  return all ? kOk : kInfeasible;
}

int cmd_plot(const std::string& csv, const std::string& out) {
  for (const auto& p : emit_plots(csv, out.empty() ? fs::path(".") : fs::path(out))) std::cout << p.string() << "\n";
  return kOk;
}

int cmd_run(const std::string& config, const std::string& algo, const std::string& out) {
  auto spec = load_experiment(config);
  if (!algo.empty() && algo != "all") {
    check_algorithm(algo);
    spec.algorithms = {algo};
  }
  const auto rows = run_experiment(spec, out.empty() ? fs::path("results") : fs::path(out),
                                   [](const RunOutcome& o) { std::cout << format_row(o.row) << std::endl; });
  for (const auto& r : rows)
    if (!r.total_delay) return kInfeasible;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Service orchestration for heterogeneous edge clusters"};
  app.require_subcommand(1);

  ScenarioSource src;
  std::uint64_t seed = 1;
  std::string out, algo, plan_path, profile, init, csv, axis, preset_name = "paper";
  std::optional<std::size_t> episodes;
  bool des = false;
  std::uint64_t horizon = 200000;
  double rel_tol = 0.05;

  auto* gen = app.add_subcommand("gen", "emit a generated scenario config");
  gen->add_option("--preset", preset_name, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out, "output file (directory with --sweep); stdout when omitted");
  gen->add_option("--sweep", axis, "arrival_rate, chain_length or request_count");

  auto* eval = app.add_subcommand("eval", "score a plan file with the delay model");
  src.attach(eval);
  eval->add_option("--plan", plan_path, "plan JSON")->required();
  eval->add_option("--seed", seed, "event simulation seed");
  eval->add_flag("--simulate", des, "also run the event simulator (needs --out)");
  eval->add_option("--out", out, "directory for delays.csv / des.csv");

  auto* train = app.add_subcommand("train", "train the SIL-GPO policy");
  src.attach(train);
  train->add_option("--seed", seed, "training seed");
  train->add_option("--episodes", episodes, "episode count (profile default otherwise)");
  train->add_option("--profile", profile, "paper or desk hyperparameters")->check(CLI::IsMember({"paper", "desk"}));
  train->add_option("--init", init, "checkpoint to start from");
  train->add_option("--out", out, "directory for training.csv, checkpoint.silgpo and plan.json");

  auto* base = app.add_subcommand("baseline", "run a reference placement algorithm");
  src.attach(base);
  base->add_option("--algo", algo, "random, greedy, genetic or all")->required();
  base->add_option("--seed", seed, "algorithm seed");
  base->add_option("--out", out, "directory for results.csv and plans");

  auto* vq = app.add_subcommand("validate-queue", "compare analytic delays with the event simulator");
  src.attach(vq);
  vq->add_option("--plan", plan_path, "plan JSON (greedy plan when omitted)");
  vq->add_option("--seed", seed, "simulation seed");
  vq->add_option("--horizon", horizon, "external arrivals to simulate");
  vq->add_option("--tolerance", rel_tol, "relative tolerance");
  vq->add_option("--out", out, "directory for des.csv");

  auto* plot = app.add_subcommand("plot", "render SVG charts from a results table or training log");
  plot->add_option("csv", csv, "CSV file")->required();
  plot->add_option("--out", out, "output directory");

  std::string exp_config;
  auto* run = app.add_subcommand("run", "run an experiment spec");
  run->add_option("--config", exp_config, "experiment JSON")->required();
  run->add_option("--algo", algo, "restrict to one algorithm");
  run->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*gen) return cmd_gen(preset_name, seed, out, axis);
    if (*eval) return cmd_eval(src, plan_path, des, seed, out);
    if (*train) return cmd_train(src, profile, seed, episodes, out, init);
    if (*base) return cmd_baseline(src, algo, seed, out);
    if (*vq) return cmd_validate_queue(src, plan_path, seed, horizon, rel_tol, out);
    if (*plot) return cmd_plot(csv, out);
    if (*run) return cmd_run(exp_config, algo, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kConfigError;
  } catch (const StructuralError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  }
  return kOk;
}
