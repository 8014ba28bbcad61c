#include "edgeorch/sil_gpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "edgeorch/errors.hpp"

namespace edgeorch {

using nn::Matrix;
using nn::Tape;
using nn::Var;

void Hyperparams::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(gamma)) throw ConfigError("gamma must lie in [0, 1]");
  if (!in_unit(gae_lambda)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(clip_eps > 0.0)) throw ConfigError("clip epsilon must be positive");
  if (!(sil_coef >= 0.0)) throw ConfigError("sil weight must be non-negative");
  if (!(entropy_coef >= 0.0)) throw ConfigError("entropy weight must be non-negative");
  if (!(lr_actor >= 0.0 && lr_critic >= 0.0)) throw ConfigError("learning rates must be non-negative");
  if (!(high_return_ratio >= 0.0)) throw ConfigError("high-return ratio must be non-negative");
  if (batch_size == 0 || mini_batch_size == 0 || k_epochs == 0 || determining_sample_freq == 0)
    throw ConfigError("batch sizes, epochs and sampling frequency must be positive");
  if (hr_capacity == 0) throw ConfigError("high-return capacity must be positive");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be non-negative");
}

void ReplayBuffer::store(Trajectory trajectory) {
  count_ += trajectory.size();
  trajectories_.push_back(std::move(trajectory));
}

void ReplayBuffer::clear() {
  trajectories_.clear();
  count_ = 0;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

bool HighReturnBuffer::offer(const Trajectory& trajectory, double gamma, double xi) {
  std::vector<double> rewards;
  rewards.reserve(trajectory.size());
  for (const auto& tr : trajectory) rewards.push_back(tr.reward);
  const auto g = discounted_returns(rewards, gamma);
  double total = 0.0;
  for (double x : g) total += x;
  if (!(total > xi * max_total_return_)) return false;

  max_total_return_ = std::max(total, max_total_return_);
  history_.push_back(max_total_return_);
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    if (!(g[t] > 0.0)) continue;
    Transition item = trajectory[t];
    item.reward = g[t];
    if (!(item.reward > 0.0)) throw ConsistencyError("high-return buffer insert with G <= 0");
    items_.push_back(std::move(item));
  }
  if (items_.size() > capacity_)
    items_.erase(items_.begin(), items_.begin() + std::ptrdiff_t(items_.size() - capacity_));
  return true;
}

void build_high_return_buffer(const ReplayBuffer& buf, const Hyperparams& hp, HighReturnBuffer& hr) {
  for (const auto& traj : buf.trajectories()) hr.offer(traj, hp.gamma, hp.high_return_ratio);
}

Gae compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                const std::vector<double>& next_values, const std::vector<std::uint8_t>& dones,
                double gamma, double gae_lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T || next_values.size() != T || dones.size() != T)
    throw ContractViolation("compute_gae: length mismatch");
  Gae out;
  out.advantages.resize(T);
  out.targets.resize(T);
  double acc = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double bootstrap = dones[t] ? 0.0 : next_values[t];
    out.targets[t] = rewards[t] + gamma * bootstrap;
    const double delta = out.targets[t] - values[t];
    acc = delta + (dones[t] ? 0.0 : gamma * gae_lambda * acc);
    out.advantages[t] = acc;
  }
  return out;
}

Gae compute_gae(const Trajectory& trajectory, nn::CriticNet& critic, double gamma, double gae_lambda) {
  std::vector<double> r, v, nv;
  std::vector<std::uint8_t> d;
  for (const auto& tr : trajectory) {
    r.push_back(tr.reward);
    v.push_back(critic.value(*tr.state));
    nv.push_back(tr.done || !tr.next_state ? 0.0 : critic.value(*tr.next_state));
    d.push_back(tr.done ? 1 : 0);
  }
  return compute_gae(r, v, nv, d, gamma, gae_lambda);
}

LossPair ppo_losses(Tape& tape, nn::ActorNet& actor, nn::CriticNet& critic,
                    const std::vector<PolicySample>& batch, const Hyperparams& hp) {
  if (batch.empty()) throw ContractViolation("ppo_losses on an empty batch");
  std::vector<Var> objective, entropies, value_err;
  for (const auto& s : batch) {
    Var lp = actor.log_probs(tape, *s.state);
    Var ratio = nn::exp(nn::add_scalar(nn::element(lp, nn::Index(s.action), 0), -s.log_prob_old));
    Var adv = tape.constant(s.advantage);
    Var surr = nn::mul(ratio, adv);
    Var clipped = nn::mul(nn::clamp(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps), adv);
    objective.push_back(nn::minimum(surr, clipped));
    entropies.push_back(nn::entropy(lp));

    Var v = critic.value(tape, *s.state);
    value_err.push_back(nn::scale(nn::square(nn::sub(tape.constant(s.target), v)), 0.5));
  }
  Var a = nn::sub(nn::neg(nn::mean(nn::concat_rows(objective))),
                  nn::scale(nn::mean(nn::concat_rows(entropies)), hp.entropy_coef));
  Var c = nn::mean(nn::concat_rows(value_err));
  return {a, c};
}

LossPair sil_losses(Tape& tape, nn::ActorNet& actor, nn::CriticNet& critic, const std::vector<SilSample>& batch) {
  if (batch.empty()) return {tape.constant(0.0), tape.constant(0.0)};
  std::vector<Var> a_terms, c_terms;
  for (const auto& s : batch) {
    Var lp = nn::element(actor.log_probs(tape, *s.state), nn::Index(s.action), 0);
    Var v = critic.value(tape, *s.state);
    // The actor term treats the rectified advantage as a constant weight.
    const double weight = std::max(s.ret - v.scalar(), 0.0);
    a_terms.push_back(nn::scale(lp, -weight));
    c_terms.push_back(nn::scale(nn::square(nn::relu(nn::sub(tape.constant(s.ret), v))), 0.5));
  }
  return {nn::mean(nn::concat_rows(a_terms)), nn::mean(nn::concat_rows(c_terms))};
}

Rollout collect_rollout(OrchestrationEnv& env, nn::ActorNet& actor, ActionMode mode, Rng& rng) {
  Rollout out;
  env.reset();
  auto state = std::make_shared<const nn::PreparedState>(nn::prepare(env.state()));
  while (!env.done()) {
    try {
      action_mask(env.state());
    } catch (const DeadlockError&) {
      out.deadlocked = true;
      if (!out.trajectory.empty()) {
        out.trajectory.back().done = true;
        out.trajectory.back().reward -= env.penalty();
        out.episode_return -= env.penalty();
      }
      break;
    }
    Tape tape;
    const Matrix& lp = actor.log_probs(tape, *state).value();
    ServerIndex action = 0;
    if (mode == ActionMode::greedy) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t n = 0; n < state->mask.size(); ++n) {
        if (state->mask[n] && lp(nn::Index(n), 0) > best) {
          best = lp(nn::Index(n), 0);
          action = n;
        }
      }
    } else {
      std::vector<double> p(state->mask.size(), 0.0);
      for (std::size_t n = 0; n < p.size(); ++n)
        if (state->mask[n]) p[n] = std::exp(lp(nn::Index(n), 0));
      action = rng.categorical(p);
    }
    const double log_prob = lp(nn::Index(action), 0);
    auto result = env.step(action);
    auto next = std::make_shared<const nn::PreparedState>(nn::prepare(result.state));
    out.trajectory.push_back(Transition{state, action, result.reward, next, log_prob, result.done});
    out.actions.push_back(action);
    out.episode_return += result.reward;
    state = std::move(next);
  }
  out.total_delay = env.current_total();
  out.plan = env.plan();
  return out;
}

std::string TrainingLog::to_csv(bool with_wallclock) const {
  std::string s = "episode,total_delay,episode_return,A_loss,C_loss,A_sil,C_sil";
  s += with_wallclock ? ",wallclock_ms\n" : "\n";
  char line[512];
  for (const auto& e : episodes) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", e.episode, e.total_delay,
                  e.episode_return, e.a_loss, e.c_loss, e.a_sil, e.c_sil);
    s += line;
    if (with_wallclock) {
      std::snprintf(line, sizeof line, ",%.3f", e.wallclock_ms);
      s += line;
    }
    s += '\n';
  }
  return s;
}

SilGpoTrainer::SilGpoTrainer(Scenario scenario, Hyperparams hp, RewardConfig rewards, nn::ArchConfig arch,
                             std::uint64_t seed)
    : hp_((hp.validate(), hp)),
      arch_(arch),
      env_(std::move(scenario), rewards),
      actor_(std::make_unique<nn::ActorNet>(arch, derive_seed(seed, 1))),
      old_actor_(std::make_unique<nn::ActorNet>(arch, derive_seed(seed, 1))),
      critic_(std::make_unique<nn::CriticNet>(arch, derive_seed(seed, 2))),
      actor_opt_(actor_->params(), nn::AdamConfig{hp.lr_actor, 0.9, 0.999, 1e-8, hp.max_grad_norm}),
      critic_opt_(critic_->params(), nn::AdamConfig{hp.lr_critic, 0.9, 0.999, 1e-8, hp.max_grad_norm}),
      hr_(hp.hr_capacity),
      rng_(derive_seed(seed, 3)) {
  if (arch_.deploy_features != env_.scenario().services.size())
    throw ConfigError("architecture input width does not match the scenario's service count");
}

void SilGpoTrainer::load_parameters(const nn::ParamStore& actor, const nn::ParamStore& critic) {
  actor_->params().assign(actor);
  old_actor_->params().assign(actor);
  critic_->params().assign(critic);
}

EpisodeLog SilGpoTrainer::run_episode() {
  const auto t0 = std::chrono::steady_clock::now();
  EpisodeLog log;
  log.episode = episode_;
  log.greedy = episode_ % hp_.determining_sample_freq == 0;
  auto rollout = collect_rollout(env_, *old_actor_, log.greedy ? ActionMode::greedy : ActionMode::sample, rng_);
  log.total_delay = rollout.total_delay;
  log.episode_return = rollout.episode_return;
  if (!rollout.trajectory.empty()) buf_.store(std::move(rollout.trajectory));
  if (buf_.size() >= hp_.batch_size) {
    update();
    log.updated = true;
  }
  log.a_loss = last_a_loss_;
  log.c_loss = last_c_loss_;
  log.a_sil = last_a_sil_;
  log.c_sil = last_c_sil_;
  ++episode_;
  log.wallclock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

TrainingLog SilGpoTrainer::train(std::size_t episodes, const std::function<void(const EpisodeLog&)>& on_episode) {
  TrainingLog log;
  for (std::size_t i = 0; i < episodes; ++i) {
    log.episodes.push_back(run_episode());
    if (on_episode) on_episode(log.episodes.back());
  }
  return log;
}

Rollout SilGpoTrainer::greedy_rollout() {
  Rng unused(0);
  return collect_rollout(env_, *old_actor_, ActionMode::greedy, unused);
}

void SilGpoTrainer::update() {
  build_high_return_buffer(buf_, hp_, hr_);

  std::vector<PolicySample> samples;
  samples.reserve(buf_.size());
  for (const auto& traj : buf_.trajectories()) {
    const auto gae = compute_gae(traj, *critic_, hp_.gamma, hp_.gae_lambda);
    for (std::size_t t = 0; t < traj.size(); ++t)
      samples.push_back({traj[t].state.get(), traj[t].action, traj[t].log_prob_old, gae.advantages[t], gae.targets[t]});
  }
  if (hp_.normalize_advantages && samples.size() > 1) {
    double mean = 0.0, var = 0.0;
    for (const auto& s : samples) mean += s.advantage;
    mean /= double(samples.size());
    for (const auto& s : samples) var += (s.advantage - mean) * (s.advantage - mean);
    const double sd = std::sqrt(var / double(samples.size()));
    for (auto& s : samples) s.advantage = (s.advantage - mean) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(samples.size());
  double sum_a = 0.0, sum_c = 0.0, sum_as = 0.0, sum_cs = 0.0;
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < hp_.k_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.index(i)]);

    for (std::size_t start = 0; start < order.size(); start += hp_.mini_batch_size) {
      const std::size_t stop = std::min(order.size(), start + hp_.mini_batch_size);
      std::vector<PolicySample> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[order[i]]);
      std::vector<SilSample> sil;
      if (!hr_.empty() && hp_.sil_coef > 0.0) {
        for (std::size_t i = start; i < stop; ++i) {
          const auto& item = hr_.transitions()[rng_.index(hr_.size())];
          sil.push_back({item.state.get(), item.action, item.reward});
        }
      }

      Tape tape;
      const auto ppo = ppo_losses(tape, *actor_, *critic_, batch, hp_);
      const auto si = sil_losses(tape, *actor_, *critic_, sil);
      Var total = nn::add(nn::add(ppo.actor, nn::scale(si.actor, hp_.sil_coef)),
                          nn::add(ppo.critic, nn::scale(si.critic, hp_.sil_coef)));
      const double values[4] = {ppo.actor.scalar(), ppo.critic.scalar(), si.actor.scalar(), si.critic.scalar()};
      for (double v : values) {
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite loss at episode " << episode_ << " update " << updates_ << " epoch " << epoch
             << ": A_loss=" << values[0] << " C_loss=" << values[1] << " A_sil=" << values[2]
             << " C_sil=" << values[3];
          throw TrainingError(os.str());
        }
      }
      tape.backward(total);
      actor_opt_.step();
      critic_opt_.step();
      if (!actor_->params().all_finite() || !critic_->params().all_finite())
        throw TrainingError("non-finite parameters after update " + std::to_string(updates_));
      sum_a += values[0];
      sum_c += values[1];
      sum_as += values[2];
      sum_cs += values[3];
      ++steps;
    }
  }
  if (steps > 0) {
    last_a_loss_ = sum_a / double(steps);
    last_c_loss_ = sum_c / double(steps);
    last_a_sil_ = sum_as / double(steps);
    last_c_sil_ = sum_cs / double(steps);
  }
  old_actor_->params().assign(actor_->params());
  buf_.clear();
  ++updates_;
}

}  // namespace edgeorch
