#include <cmath>
#include <memory>

#include "doctest.h"
#include "edgeorch/errors.hpp"
#include "edgeorch/generator.hpp"
#include "edgeorch/sil_gpo.hpp"
#include "oracles.hpp"

using namespace edgeorch;

namespace {

Trajectory from_rewards(const std::vector<double>& rewards) {
  Trajectory t;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    Transition tr;
    tr.action = i;
    tr.reward = rewards[i];
    tr.done = i + 1 == rewards.size();
    t.push_back(tr);
  }
  return t;
}

nn::ArchConfig small_arch(std::size_t services) {
  auto a = nn::ArchConfig::for_services(services);
  a.hidden = 8;
  a.heads = 2;
  a.head_dim = 4;
  a.trunk = 16;
  return a;
}

Hyperparams quick_hp() {
  Hyperparams hp;
  hp.batch_size = 24;
  hp.mini_batch_size = 8;
  hp.k_epochs = 2;
  hp.lr_actor = 1e-3;
  hp.lr_critic = 1e-3;
  return hp;
}

}  // namespace

TEST_CASE("GAE recursion equals the truncated sum") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + rng.index(12);
    std::vector<double> r(T), v(T), vn(T);
    std::vector<std::uint8_t> done(T, 0);
    for (std::size_t t = 0; t < T; ++t) {
      r[t] = rng.uniform(-2, 2);
      v[t] = rng.uniform(-2, 2);
      vn[t] = t + 1 < T ? v[t + 1] : rng.uniform(-2, 2);
      done[t] = rng.bernoulli(0.15);
    }
    const double gamma = rng.uniform(0.5, 1.0), lambda = rng.uniform(0.0, 1.0);
    const auto gae = compute_gae(r, v, vn, done, gamma, lambda);
    const auto oracle = test::brute_force_gae(r, v, vn, done, gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) {
      CHECK(gae.advantages[t] == doctest::Approx(oracle[t]).epsilon(1e-12));
      CHECK(gae.targets[t] == doctest::Approx(r[t] + (done[t] ? 0.0 : gamma * vn[t])).epsilon(1e-12));
    }
  }
}

TEST_CASE("GAE with lambda 1 and zero values gives discounted returns") {
  const std::vector<double> r{1.0, 0.0, 2.0, -1.0};
  const std::vector<double> zero(4, 0.0);
  const auto gae = compute_gae(r, zero, zero, {0, 0, 0, 1}, 0.9, 1.0);
  const auto g = discounted_returns(r, 0.9);
  for (std::size_t t = 0; t < 4; ++t) CHECK(gae.advantages[t] == doctest::Approx(g[t]));
  CHECK(g[3] == -1.0);
  CHECK(g[2] == doctest::Approx(2.0 - 0.9));
  CHECK(g[0] == doctest::Approx(1.0 + 0.81 * 2.0 - 0.729));
}

TEST_CASE("high-return buffer admission and contents") {
  HighReturnBuffer hr(100);
  CHECK_FALSE(hr.offer(from_rewards({-1.0, -1.0}), 0.9, 0.8));  // sum G < 0 = 0.8 * 0
  CHECK(hr.empty());
  CHECK(hr.offer(from_rewards({1.0, 1.0}), 0.9, 0.8));  // G = 1.9, 1; total 2.9
  CHECK(hr.max_total_return() == doctest::Approx(2.9));
  CHECK(hr.size() == 2);
  CHECK_FALSE(hr.offer(from_rewards({1.0, 0.0}), 0.9, 0.8));  // 1 < 2.32
  CHECK_FALSE(hr.offer(from_rewards({3.0, -1.0}), 0.9, 0.8));  // G = 2.1, -1; total 1.1
  CHECK(hr.offer(from_rewards({3.0, 1.0}), 0.9, 0.8));         // total 4.9
  CHECK(hr.size() == 4);
  CHECK(hr.transitions().back().reward == 1.0);
}

TEST_CASE("high-return buffer invariants under random offers") {
  Rng rng(99);
  HighReturnBuffer hr(64);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> r(1 + rng.index(8));
    for (auto& x : r) x = rng.uniform(-1.0, 1.5);
    hr.offer(from_rewards(r), 0.9, 0.8);
    CHECK(hr.size() <= 64);
    for (const auto& t : hr.transitions()) CHECK(t.reward > 0.0);
  }
  const auto& h = hr.max_history();
  CHECK(h.front() == 0.0);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] >= h[i - 1]);
  CHECK(h.back() == hr.max_total_return());
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.gamma = 1.5;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = Hyperparams{};
  hp.mini_batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("losses at the behaviour policy") {
  const auto sc = generate_scenario(desk_preset(), 1);
  OrchestrationEnv env(sc);
  env.reset();
  nn::ActorNet actor(small_arch(sc.services.size()), 1);
  nn::CriticNet critic(small_arch(sc.services.size()), 2);
  auto state = std::make_shared<nn::PreparedState>(nn::prepare(env.state()));
  const auto probs = actor.probabilities(*state);
  ServerIndex a = 0;
  while (!state->mask[a]) ++a;
  const double v = critic.value(*state);

  Hyperparams hp;
  std::vector<PolicySample> batch{{state.get(), a, std::log(probs[a]), 1.5, v + 2.0}};
  nn::Tape t;
  const auto loss = ppo_losses(t, actor, critic, batch, hp);
  double h = 0.0;
  for (double p : probs)
    if (p > 0) h -= p * std::log(p);
  CHECK(loss.actor.scalar() == doctest::Approx(-1.5 - hp.entropy_coef * h).epsilon(1e-9));
  CHECK(loss.critic.scalar() == doctest::Approx(0.5 * 4.0).epsilon(1e-9));

  nn::Tape u;
  const auto sil = sil_losses(u, actor, critic, {{state.get(), a, v + 3.0}, {state.get(), a, v - 1.0}});
  CHECK(sil.actor.scalar() == doctest::Approx(-3.0 * std::log(probs[a]) / 2.0).epsilon(1e-9));
  CHECK(sil.critic.scalar() == doctest::Approx(0.5 * 9.0 / 2.0).epsilon(1e-9));
  nn::Tape w;
  CHECK(sil_losses(w, actor, critic, {}).actor.scalar() == 0.0);
  nn::Tape x;
  CHECK_THROWS_AS(ppo_losses(x, actor, critic, {}, hp), ContractViolation);
}

TEST_CASE("rollouts produce complete, consistent trajectories") {
  const auto sc = generate_scenario(desk_preset(), 1);
  OrchestrationEnv env(sc);
  nn::ActorNet actor(small_arch(sc.services.size()), 3);
  Rng rng(5);
  const auto ro = collect_rollout(env, actor, ActionMode::sample, rng);
  REQUIRE_FALSE(ro.deadlocked);
  CHECK(ro.trajectory.size() == env.total_steps());
  CHECK(ro.trajectory.back().done);
  double ret = 0.0;
  for (const auto& tr : ro.trajectory) {
    ret += tr.reward;
    CHECK(tr.state->mask[tr.action] == 1);
    CHECK(tr.log_prob_old <= 0.0);
  }
  CHECK(ret == doctest::Approx(ro.episode_return));
  CHECK(ro.total_delay == doctest::Approx(evaluate_plan(sc, ro.plan, env.penalty()).total));
  CHECK(ro.plan.total() == int(env.total_steps()));
}

TEST_CASE("training is deterministic per seed and logs every episode") {
  const auto sc = generate_scenario(desk_preset(), 1);
  auto run = [&](std::uint64_t seed) {
    SilGpoTrainer trainer(sc, quick_hp(), RewardConfig{}, small_arch(sc.services.size()), seed);
    const auto log = trainer.train(12);
    CHECK(trainer.updates() >= 1);
    CHECK(trainer.episodes_run() == 12);
    return log.to_csv(false);
  };
  const auto a = run(4);
  CHECK(a == run(4));
  CHECK(a != run(5));
  CHECK(a.rfind("episode,total_delay,episode_return,A_loss,C_loss,A_sil,C_sil", 0) == 0);
}

TEST_CASE("greedy episodes follow the sampling frequency") {
  const auto sc = generate_scenario(desk_preset(), 2);
  auto hp = quick_hp();
  hp.determining_sample_freq = 3;
  SilGpoTrainer trainer(sc, hp, RewardConfig{}, small_arch(sc.services.size()), 1);
  const auto log = trainer.train(9);
  for (const auto& e : log.episodes) CHECK(e.greedy == (e.episode % 3 == 0));
  for (const auto& e : log.episodes) CHECK(std::isfinite(e.total_delay));
  CHECK(trainer.actor().params().all_finite());
  CHECK(trainer.critic().params().all_finite());
}
