// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 3 9        run the listed criteria only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "edgeorch/baselines.hpp"
#include "edgeorch/checkpoint.hpp"
#include "edgeorch/delay.hpp"
#include "edgeorch/env.hpp"
#include "edgeorch/event_sim.hpp"
#include "edgeorch/experiment.hpp"
#include "edgeorch/generator.hpp"
#include "edgeorch/llm_cost.hpp"
#include "edgeorch/policy.hpp"
#include "edgeorch/scenario_io.hpp"
#include "edgeorch/sil_gpo.hpp"
#include "oracles.hpp"

using namespace edgeorch;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and budgets -----------------------------------------

constexpr double kQueueTol = 1e-9;
constexpr double kDesRelTol = 0.05;
constexpr std::uint64_t kDesArrivals = 200000;
constexpr double kDesWarmup = 0.2;
constexpr double kPathTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFloor = 1e-3;  // denominator floor for near-zero gradients
constexpr double kGradStep = 1e-6;
constexpr std::size_t kGradMaxParams = 10000;
constexpr std::size_t kMaskSamples = 10000;
constexpr std::size_t kSilTrajectories = 100;
constexpr std::size_t kGaInstances = 10;
constexpr std::size_t kGaMaxPlacements = 243;  // 3^5
constexpr double kGaTol = 1e-9;
constexpr std::uint64_t kLearnScenarioSeed = 1;
constexpr std::size_t kLearnEpisodes = 300;
constexpr std::size_t kLearnSeeds = 5;
constexpr std::size_t kLearnRequired = 3;
constexpr std::size_t kRandomSamples = 100;
constexpr double kRandomMargin = 0.10;
constexpr double kGreedySlack = 1e-9;  // relative, for ties with the greedy plan
constexpr double kTelescopeTol = 1e-6;
constexpr std::size_t kTelescopeRollouts = 20;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// ---- 1 ---------------------------------------------------------------------

Outcome queuing() {
  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double mu = 0.5 + 1.5 * i;
      const double lambda = mu * (0.005 + 0.098 * j);
      const double expected = 1.0 / (mu - lambda);
      worst = std::max(worst, std::abs(mmc_sojourn(lambda, mu, 1) - expected) / std::max(1.0, expected));
    }
  const double erlang = std::abs(mmc_sojourn(1.5, 1.0, 2) - 16.0 / 7.0);
  return {worst <= kQueueTol && erlang <= kQueueTol,
          fmt("M/M/1 grid max err %.2e, Erlang-C err %.2e", worst, erlang)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome des_cross_validation() {
  Outcome out;
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto sc = generate_scenario(desk_preset(), seed);
    const auto plan = greedy_aggregate(sc);
    const auto eval = evaluate_plan(sc, plan);
    SimConfig cfg;
    cfg.horizon = kDesArrivals;
    cfg.warmup_fraction = kDesWarmup;
    cfg.seed = seed;
    const auto report = simulate(sc, plan, eval.routing, cfg);
    for (const auto& v : compare(eval.requests, report, kDesRelTol)) {
      ++checked;
      failed += !v.pass;
      worst = std::max(worst, std::abs(v.analytic - v.empirical) / v.analytic);
    }
  }
  out.pass = failed == 0 && checked > 0;
  out.detail = std::to_string(checked) + " request classes, " + std::to_string(failed) + " outside tolerance, " +
               fmt("max rel gap %.3f", worst);
  return out;
}

// ---- 3 ---------------------------------------------------------------------

Outcome path_equivalence() {
  Rng rng(303);
  std::size_t instances = 0, compared = 0;
  double worst = 0.0;
  while (instances < 50) {
    const auto sc = test::random_small_scenario(rng, 4, 4, 4, 4);
    const auto plan = test::random_plan(rng, sc);
    const auto eval = evaluate_plan(sc, plan);
    bool any = false;
    for (std::size_t r = 0; r < sc.requests.size(); ++r) {
      if (!is_feasible(eval.requests[r])) continue;
      const double dp = delay_value(eval.requests[r]);
      const double paths = test::path_form_delay(sc, r, plan, eval.routing, eval.arrivals);
      worst = std::max(worst, std::abs(dp - paths) / std::max(1.0, paths));
      ++compared;
      any = true;
    }
    instances += any;
  }
  return {worst <= kPathTol, std::to_string(compared) + " requests on 50 instances, " + fmt("max err %.2e", worst)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome llm_cost() {
  Rng rng(404);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = test::random_llm_profile(rng);
    mismatches += total_flops(p) != test::counted_total_flops(p);
    mismatches += merged_total_flops(p) != total_flops(p);
    mismatches += total_flops(p) != double(p.n_layers) * (prefill_flops(p) + decode_flops(p));
  }
  LlmProfile one{4096, 32, 8, 3.5, 32, 512, 1};
  const bool zero_decode = decode_flops(one) == 0.0;
  return {mismatches == 0 && zero_decode,
          std::to_string(mismatches) + " mismatches over 1000 profiles, decode(s_out=1) = " +
              fmt("%g", decode_flops(one))};
}

// ---- 5 ---------------------------------------------------------------------

Outcome gradient_soundness() {
  const auto sc = generate_scenario(desk_preset(), 1);
  auto arch = nn::ArchConfig::for_services(sc.services.size());
  arch.hidden = 8;
  arch.heads = 2;
  arch.head_dim = 4;
  arch.gat_layers = 2;
  arch.trunk = 12;
  nn::ActorNet actor(arch, 11);
  nn::CriticNet critic(arch, 12);
  const std::size_t params = actor.params().scalars() + critic.params().scalars();

  // A few states along one episode, with actions and ratios on both sides of the clip range.
  OrchestrationEnv env(sc);
  env.reset();
  std::vector<std::shared_ptr<nn::PreparedState>> states;
  Rng rng(5);
  while (!env.done() && states.size() < 4) {
    states.push_back(std::make_shared<nn::PreparedState>(nn::prepare(env.state())));
    std::vector<ServerIndex> legal;
    for (std::size_t n = 0; n < env.state().avail_mask.size(); ++n)
      if (env.state().avail_mask[n]) legal.push_back(n);
    env.step(legal[rng.index(legal.size())]);
  }
  const double ratio_offsets[] = {0.1, -0.1, 0.5, -0.6};
  const double advantages[] = {1.3, -0.7, 0.9, -1.1};
  std::vector<PolicySample> ppo;
  std::vector<SilSample> sil;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto probs = actor.probabilities(*states[i]);
    ServerIndex a = 0;
    for (std::size_t n = 0; n < probs.size(); ++n)
      if (probs[n] > probs[a]) a = n;
    const double v = critic.value(*states[i]);
    ppo.push_back({states[i].get(), a, std::log(probs[a]) - ratio_offsets[i], advantages[i], v + 0.5 * double(i) - 0.8});
    sil.push_back({states[i].get(), a, v + (i % 2 ? -0.6 : 0.9)});
  }
  Hyperparams hp;

  // Full losses as used by an update step.
  auto losses = [&](bool backward) {
    nn::Tape tape;
    const auto p = ppo_losses(tape, actor, critic, ppo, hp);
    const auto s = sil_losses(tape, actor, critic, sil);
    const auto a = nn::add(p.actor, nn::scale(s.actor, hp.sil_coef));
    const auto c = nn::add(p.critic, nn::scale(s.critic, hp.sil_coef));
    const std::pair<double, double> values{a.scalar(), c.scalar()};
    if (backward) tape.backward(nn::add(a, c));
    return values;
  };
  actor.params().zero_grad();
  critic.params().zero_grad();
  losses(true);

  double worst = 0.0;
  std::size_t checked = 0;
  for (nn::ParamStore* store : {&actor.params(), &critic.params()}) {
    const bool is_actor = store == &actor.params();
    for (std::size_t k = 0; k < store->tensors(); ++k) {
      auto& p = store->at(k);
      for (nn::Index i = 0; i < p.value.size(); ++i) {
        const double saved = p.value.data()[i];
        p.value.data()[i] = saved + kGradStep;
        const auto up = losses(false);
        p.value.data()[i] = saved - kGradStep;
        const auto down = losses(false);
        p.value.data()[i] = saved;
        // Actor parameters only enter the actor loss and vice versa.
        const double numeric = is_actor ? (up.first - down.first) / (2 * kGradStep)
                                        : (up.second - down.second) / (2 * kGradStep);
        const double analytic = p.grad.data()[i];
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max({kGradFloor, std::abs(numeric), std::abs(analytic)}));
        ++checked;
      }
    }
  }
  return {worst < kGradRelTol && params <= kGradMaxParams && checked == params,
          std::to_string(checked) + " parameters, " + fmt("max rel err %.2e", worst)};
}

// ---- 6 ---------------------------------------------------------------------

Outcome masking() {
  Rng rng(606);
  std::size_t samples = 0, masked_picks = 0, masked_nonzero = 0, masked_entries = 0;
  std::uint64_t scenario_seed = 1;
  while (samples < kMaskSamples) {
    const auto sc = generate_scenario(desk_preset(), scenario_seed);
    nn::ActorNet actor(nn::ArchConfig::for_services(sc.services.size()), scenario_seed);
    OrchestrationEnv env(sc);
    for (int episode = 0; episode < 50 && samples < kMaskSamples; ++episode) {
      env.reset();
      while (!env.done() && samples < kMaskSamples) {
        auto input = nn::prepare(env.state());
        // Half of the states get an arbitrary non-empty mask.
        if (rng.bernoulli(0.5)) {
          do {
            for (auto& m : input.mask) m = rng.bernoulli(0.5);
          } while (std::none_of(input.mask.begin(), input.mask.end(), [](auto m) { return m != 0; }));
        }
        const auto probs = actor.probabilities(input);
        for (std::size_t n = 0; n < probs.size(); ++n)
          if (!input.mask[n]) {
            ++masked_entries;
            masked_nonzero += probs[n] != 0.0;
          }
        const auto pick = rng.categorical(probs);
        masked_picks += input.mask[pick] == 0;
        ++samples;
        // Walk on with a legal action of the true mask.
        std::vector<ServerIndex> legal;
        for (std::size_t n = 0; n < env.state().avail_mask.size(); ++n)
          if (env.state().avail_mask[n]) legal.push_back(n);
        env.step(legal[rng.index(legal.size())]);
      }
    }
    ++scenario_seed;
  }
  return {masked_picks == 0 && masked_nonzero == 0 && masked_entries > 0,
          std::to_string(samples) + " samples, " + std::to_string(masked_entries) + " masked entries, " +
              std::to_string(masked_picks) + " masked picks, " + std::to_string(masked_nonzero) +
              " non-zero masked probabilities"};
}

// ---- 7 ---------------------------------------------------------------------

Outcome sil_buffer() {
  Rng rng(707);
  Hyperparams hp;
  HighReturnBuffer hr(hp.hr_capacity);
  std::size_t admitted = 0, non_positive = 0;
  for (std::size_t k = 0; k < kSilTrajectories; ++k) {
    Trajectory t(1 + rng.index(10));
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i].action = i;
      t[i].reward = rng.uniform(-3.0, 3.0) + (k % 3 == 0 ? 1.0 : -0.5);
      t[i].done = i + 1 == t.size();
    }
    admitted += hr.offer(t, hp.gamma, hp.high_return_ratio);
    for (const auto& tr : hr.transitions()) non_positive += !(tr.reward > 0.0);
  }
  const auto& history = hr.max_history();
  bool monotone = true;
  std::string log = "max_total_return log:";
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i > 0) monotone = monotone && history[i] >= history[i - 1];
    log += fmt(" %.3f", history[i]);
  }
  std::printf("    %s\n", log.c_str());
  return {non_positive == 0 && monotone && admitted > 0,
          std::to_string(admitted) + " of 100 admitted, " + std::to_string(hr.size()) + " transitions, " +
              std::to_string(non_positive) + " with G <= 0, monotone=" + (monotone ? "yes" : "no")};
}

// ---- 8 ---------------------------------------------------------------------

// Three tight servers and at most five budgeted instances.
Scenario enumerable_instance(Rng& rng) {
  while (true) {
    std::vector<ServerNode> nodes;
    for (int n = 0; n < 3; ++n)
      nodes.push_back(test::server("n" + std::to_string(n), ServerKind::ucs, int(rng.uniform_int(2, 3)), 0, 100.0,
                                   rng.uniform(1.0, 4.0)));
    Scenario sc;
    sc.name = "enum";
    sc.topology = NetworkTopology(std::move(nodes));
    sc.topology.add_link(0, 1, rng.uniform(1.0, 4.0));
    sc.topology.add_link(1, 2, rng.uniform(1.0, 4.0));
    if (rng.bernoulli(0.5)) sc.topology.add_link(0, 2, rng.uniform(1.0, 4.0));
    for (int s = 0; s < 3; ++s)
      sc.services.push_back(test::service("s" + std::to_string(s), ServiceKind::micro, 1, 0, 13.0,
                                          rng.uniform(20.0, 200.0), rng.uniform(5.0, 12.0)));
    for (int r = 0; r < 3; ++r) {
      std::vector<ServiceIndex> chain{ServiceIndex(rng.index(3))};
      if (rng.bernoulli(0.7)) chain.push_back((chain[0] + 1 + rng.index(2)) % 3);
      sc.requests.push_back(test::request("r" + std::to_string(r), chain, rng.index(3), rng.uniform(1.0, 4.0)));
    }
    const auto budget = instance_budget(sc);
    int total = 0;
    for (int b : budget) total += b;
    if (total > 5) continue;
    if (test::exhaustive_optimum(sc).feasible == 0) continue;
    return sc;
  }
}

Outcome ga_optimality() {
  Rng rng(808);
  std::size_t matched = 0, largest = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < kGaInstances; ++k) {
    const auto sc = enumerable_instance(rng);
    const auto oracle = test::exhaustive_optimum(sc);
    largest = std::max(largest, oracle.placements);
    GaConfig cfg;
    cfg.seed = k + 1;
    const auto res = genetic_search(sc, cfg);
    const double gap = (res.total_delay - oracle.best) / oracle.best;
    worst = std::max(worst, gap);
    matched += gap <= kGaTol;
  }
  return {matched == kGaInstances && largest <= kGaMaxPlacements,
          std::to_string(matched) + "/" + std::to_string(kGaInstances) + " at the optimum, largest space " +
              std::to_string(largest) + fmt(" placements, max gap %.2e", worst)};
}

// ---- 9 ---------------------------------------------------------------------

Outcome learning() {
  const auto sc = generate_scenario(desk_preset(), kLearnScenarioSeed);
  const double greedy = evaluate_plan(sc, greedy_aggregate(sc)).total;
  double random_mean = 0.0;
  for (std::size_t i = 0; i < kRandomSamples; ++i) random_mean += evaluate_plan(sc, random_place(sc, i + 1)).total;
  random_mean /= double(kRandomSamples);
  std::printf("    desk scenario %llu: %zu servers, %zu services, %zu requests; greedy %.4f, random mean %.4f\n",
              static_cast<unsigned long long>(kLearnScenarioSeed), sc.topology.size(), sc.services.size(),
              sc.requests.size(), greedy, random_mean);

  auto profile = training_profile("desk");
  auto arch = profile.arch;
  arch.deploy_features = arch.route_features = sc.services.size();
  std::size_t passed = 0;
  for (std::uint64_t seed = 1; seed <= kLearnSeeds; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    SilGpoTrainer trainer(sc, profile.hp, profile.rewards, arch, seed);
    trainer.train(kLearnEpisodes);
    const auto ro = trainer.greedy_rollout();
    const double delay = ro.deadlocked ? INFINITY : evaluate_plan(sc, ro.plan).total;
    const bool ok = delay <= greedy * (1.0 + kGreedySlack) && delay <= (1.0 - kRandomMargin) * random_mean;
    passed += ok;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("    seed %llu: greedy-rollout delay %.4f %s (%.1f s)\n", static_cast<unsigned long long>(seed), delay,
                ok ? "ok" : "miss", s);
  }
  return {passed >= kLearnRequired, std::to_string(passed) + "/" + std::to_string(kLearnSeeds) +
                                        " seeds beat greedy and the random mean by 10%"};
}

// ---- 10 --------------------------------------------------------------------

Outcome telescoping() {
  RewardConfig rc;
  rc.alpha1 = 1.0;
  rc.scaling_bonus = 0.0;
  Rng rng(1010);
  double worst = 0.0;
  for (std::size_t k = 0; k < kTelescopeRollouts; ++k) {
    OrchestrationEnv env(generate_scenario(desk_preset(), 1 + k % 5), rc);
    env.reset();
    double sum = 0.0;
    while (!env.done()) {
      std::vector<ServerIndex> legal;
      for (std::size_t n = 0; n < env.state().avail_mask.size(); ++n)
        if (env.state().avail_mask[n]) legal.push_back(n);
      sum += env.step(legal[rng.index(legal.size())]).intermediate;
    }
    worst = std::max(worst, std::abs(sum - (env.initial_total() - env.current_total())));
  }
  return {worst <= kTelescopeTol, fmt("max |sum R1 - (T0 - T_final)| = %.2e", worst)};
}

// ---- 11 --------------------------------------------------------------------

Outcome reproducibility() {
  std::vector<std::string> broken;
  const auto a = generate_scenario(desk_preset(), 11), b = generate_scenario(desk_preset(), 11);
  if (scenario_to_json(a) != scenario_to_json(b)) broken.push_back("scenario");

  const auto plan = greedy_aggregate(a);
  const auto routing = proportional_routing(plan, a.topology, a.requests);
  SimConfig cfg;
  cfg.horizon = 20000;
  cfg.seed = 11;
  if (simulate(a, plan, routing, cfg).to_csv() != simulate(b, plan, routing, cfg).to_csv()) broken.push_back("des");

  auto profile = training_profile("desk");
  auto arch = profile.arch;
  arch.deploy_features = arch.route_features = a.services.size();
  SilGpoTrainer t1(a, profile.hp, profile.rewards, arch, 3), t2(b, profile.hp, profile.rewards, arch, 3);
  if (t1.train(40).to_csv(false) != t2.train(40).to_csv(false)) broken.push_back("training log");

  const auto dir = fs::temp_directory_path() / "edgeorch_acceptance";
  fs::create_directories(dir);
  save_trainer(t1, dir / "t1.silgpo");
  save_trainer(t2, dir / "t2.silgpo");
  if (read_file(dir / "t1.silgpo") != read_file(dir / "t2.silgpo")) broken.push_back("checkpoint bytes");
  SilGpoTrainer restored(a, profile.hp, profile.rewards, arch, 999);
  restore_trainer(restored, load_checkpoint(dir / "t1.silgpo"));
  if (restored.greedy_rollout().actions != t1.greedy_rollout().actions) broken.push_back("greedy trajectory");
  fs::remove_all(dir);

  std::string detail = "scenario, DES report, training log, checkpoint";
  if (!broken.empty()) {
    detail = "differs:";
    for (const auto& s : broken) detail += " " + s;
  }
  return {broken.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "queuing correctness", 1.0, queuing},
      {2, "DES cross-validation", 120.0, des_cross_validation},
      {3, "path-decomposition equivalence", 30.0, path_equivalence},
      {4, "LLM cost model", 10.0, llm_cost},
      {5, "gradient soundness", 60.0, gradient_soundness},
      {6, "masking guarantee", 0.0, masking},
      {7, "SIL buffer invariants", 0.0, sil_buffer},
      {8, "GA optimality on enumerable instances", 60.0, ga_optimality},
      {9, "learning end-to-end", 900.0, learning},
      {10, "reward telescoping", 0.0, telescoping},
      {11, "reproducibility", 0.0, reproducibility},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0.0 || s <= c.budget_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s %2d %s: %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), s,
                c.budget_s > 0.0 ? (in_time ? fmt(" <= %.0f s", c.budget_s) : fmt(" > %.0f s", c.budget_s)).c_str()
                                 : "");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
