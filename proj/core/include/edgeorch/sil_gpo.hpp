#pragma once

// Actor-critic training with a clipped surrogate objective, generalized
// advantage estimation and self-imitation of high-return transitions.
//
// Sign conventions: every loss here is minimized. The actor loss is
//   A_loss = -mean(min(r * A, clip(r, 1-eps, 1+eps) * A)) - eta * mean(H)
// with r = exp(log pi_new - log pi_old), so descending it ascends the
// clipped surrogate and the entropy bonus.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgeorch/env.hpp"
#include "edgeorch/optim.hpp"
#include "edgeorch/policy.hpp"
#include "edgeorch/random.hpp"

namespace edgeorch {

struct Hyperparams {
  double lr_actor = 5e-5;
  double lr_critic = 1e-5;
  double gamma = 0.9;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.05;
  double sil_coef = 0.2;
  double high_return_ratio = 0.8;
  std::size_t batch_size = 512;
  std::size_t mini_batch_size = 64;
  std::size_t k_epochs = 8;
  std::size_t determining_sample_freq = 10;
  std::size_t hr_capacity = 2048;  // oldest high-return transitions drop first
  double max_grad_norm = 0.5;      // 0 disables clipping
  bool normalize_advantages = true;

  void validate() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct Transition {
  std::shared_ptr<const nn::PreparedState> state;
  ServerIndex action = 0;
  double reward = 0.0;
  std::shared_ptr<const nn::PreparedState> next_state;
  double log_prob_old = 0.0;
  bool done = false;
};

using Trajectory = std::vector<Transition>;

class ReplayBuffer {
 public:
  void store(Trajectory trajectory);
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  void clear();

 private:
  std::vector<Trajectory> trajectories_;
  std::size_t count_ = 0;
};

// G_t = sum_{i >= t} gamma^(i-t) r_i within one trajectory.
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

class HighReturnBuffer {
 public:
  explicit HighReturnBuffer(std::size_t capacity = 2048) : capacity_(capacity) {}

  // Admits the trajectory iff sum_t G_t > xi * max_total_return (the maximum
  // before this trajectory), then stores transitions with G_t > 0 with their
  // reward replaced by G_t. Returns true when admitted.
  bool offer(const Trajectory& trajectory, double gamma, double xi);

  const std::vector<Transition>& transitions() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  double max_total_return() const { return max_total_return_; }
  // Every value max_total_return took, starting at 0.
  const std::vector<double>& max_history() const { return history_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  double max_total_return_ = 0.0;
  std::vector<double> history_{0.0};
};

// Offers each trajectory of buf in order.
void build_high_return_buffer(const ReplayBuffer& buf, const Hyperparams& hp, HighReturnBuffer& hr);

struct Gae {
  std::vector<double> advantages;
  std::vector<double> targets;
};

// values[t] = V(s_t), next_values[t] = V(s_{t+1}); a done step bootstraps
// from 0 and stops the advantage recursion.
Gae compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                const std::vector<double>& next_values, const std::vector<std::uint8_t>& dones,
                double gamma, double gae_lambda);
Gae compute_gae(const Trajectory& trajectory, nn::CriticNet& critic, double gamma, double gae_lambda);

struct PolicySample {
  const nn::PreparedState* state = nullptr;
  ServerIndex action = 0;
  double log_prob_old = 0.0;
  double advantage = 0.0;
  double target = 0.0;
};

struct SilSample {
  const nn::PreparedState* state = nullptr;
  ServerIndex action = 0;
  double ret = 0.0;
};

struct LossPair {
  nn::Var actor;
  nn::Var critic;
};

LossPair ppo_losses(nn::Tape& tape, nn::ActorNet& actor, nn::CriticNet& critic,
                    const std::vector<PolicySample>& batch, const Hyperparams& hp);
// Zero losses for an empty batch.
LossPair sil_losses(nn::Tape& tape, nn::ActorNet& actor, nn::CriticNet& critic,
                    const std::vector<SilSample>& batch);

enum class ActionMode { sample, greedy };

struct Rollout {
  Trajectory trajectory;
  double total_delay = 0.0;
  double episode_return = 0.0;
  bool deadlocked = false;
  DeploymentPlan plan;
  std::vector<ServerIndex> actions;
};

// One episode from env.reset(). A deadlock ends the episode early; the last
// stored transition becomes terminal and its reward is reduced by the
// environment's penalty.
Rollout collect_rollout(OrchestrationEnv& env, nn::ActorNet& actor, ActionMode mode, Rng& rng);

struct EpisodeLog {
  std::size_t episode = 0;
  double total_delay = 0.0;
  double episode_return = 0.0;
  double a_loss = 0.0;
  double c_loss = 0.0;
  double a_sil = 0.0;
  double c_sil = 0.0;
  double wallclock_ms = 0.0;
  bool greedy = false;
  bool updated = false;
};

struct TrainingLog {
  std::vector<EpisodeLog> episodes;

  // Loss columns hold the most recent update's mean losses.
  std::string to_csv(bool with_wallclock = true) const;
};

class SilGpoTrainer {
 public:
  SilGpoTrainer(Scenario scenario, Hyperparams hp, RewardConfig rewards, nn::ArchConfig arch,
                std::uint64_t seed);

  EpisodeLog run_episode();
  TrainingLog train(std::size_t episodes, const std::function<void(const EpisodeLog&)>& on_episode = {});

  // Deterministic argmax rollout of the behaviour policy.
  Rollout greedy_rollout();

  nn::ActorNet& actor() { return *actor_; }
  nn::ActorNet& old_actor() { return *old_actor_; }
  nn::CriticNet& critic() { return *critic_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const nn::ArchConfig& arch() const { return arch_; }
  const HighReturnBuffer& high_return_buffer() const { return hr_; }
  OrchestrationEnv& env() { return env_; }
  std::size_t episodes_run() const { return episode_; }
  std::size_t updates() const { return updates_; }

  // Replace parameters (e.g. from a checkpoint); the old actor is synced.
  void load_parameters(const nn::ParamStore& actor, const nn::ParamStore& critic);

 private:
  void update();

  Hyperparams hp_;
  nn::ArchConfig arch_;
  OrchestrationEnv env_;
  std::unique_ptr<nn::ActorNet> actor_;
  std::unique_ptr<nn::ActorNet> old_actor_;
  std::unique_ptr<nn::CriticNet> critic_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
  ReplayBuffer buf_;
  HighReturnBuffer hr_;
  Rng rng_;
  std::size_t episode_ = 0;
  std::size_t updates_ = 0;
  double last_a_loss_ = 0.0, last_c_loss_ = 0.0, last_a_sil_ = 0.0, last_c_sil_ = 0.0;
};

}  // namespace edgeorch
