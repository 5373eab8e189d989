#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marl/agents.hpp"
#include "marl/errors.hpp"
#include "marl/gridworld.hpp"
#include "marl/log.hpp"
#include "marl/tensor/optimizer.hpp"

namespace marl::training {

using agents::ActMode;
using agents::Message;
using agents::PolicyNetwork;

struct TrainConfig {
  double lr0 = 1e-3;
  int episodes = 1000;  // N_total
  double lr_min = 1e-5;
  double gamma = 0.99;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::uint64_t seed = 0;
  tensor::OptimizerKind optimizer = tensor::OptimizerKind::adam;
  /// Global gradient-norm clip; 0 disables.
  double max_grad_norm = 0.0;
  /// Weight of the message-influence bonus; 0 disables.
  double message_reward_coef = 0.0;

  void validate() const {
    if (!(lr_min > 0) || lr_min > lr0) throw ConfigError("train.lr_min must satisfy 0 < lr_min <= lr0");
    if (!(gamma > 0) || gamma > 1) throw ConfigError("train.gamma must be in (0, 1]");
    if (episodes < 1) throw ConfigError("train.episodes must be >= 1");
    if (value_coef < 0 || entropy_coef < 0 || max_grad_norm < 0 || message_reward_coef < 0) {
      throw ConfigError("train coefficients must be non-negative");
    }
  }
};

/// Linear decay from lr0 to zero over `episodes`, floored at lr_min.
inline double lr_schedule(long episode, const TrainConfig& cfg) {
  const double lr = cfg.lr0 * (1.0 - static_cast<double>(episode) / static_cast<double>(cfg.episodes));
  return std::max(cfg.lr_min, lr);
}

/// G_t = r_t + gamma * G_{t+1} with G_T = 0.
inline std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

/// splitmix64-based derivation of independent seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

inline constexpr std::uint64_t kStreamTrainEnv = 1;
inline constexpr std::uint64_t kStreamTrainPolicy = 2;
inline constexpr std::uint64_t kStreamInit = 3;
inline constexpr std::uint64_t kStreamEvalEnv = 4;
inline constexpr std::uint64_t kStreamEvalPolicy = 5;

/// One agent's record of one timestep.
struct Transition {
  std::vector<double> observation;
  Message incoming;
  int action = 0;
  double action_log_prob = 0;
  std::vector<int> message_tokens;  // LDC only
  double message_log_prob = 0;      // LDC only
  double value = 0;
  double reward = 0;  // shared reward plus this agent's message bonus
  Message sent;
};

struct EpisodeLog {
  env::EnvState initial;
  std::array<std::vector<Transition>, env::kNumAgents> steps;
  std::vector<double> shared_rewards;
  bool terminated = false;
  bool truncated = false;
  int optimal_steps = 0;

  int length() const { return static_cast<int>(shared_rewards.size()); }
  bool direct_success() const { return terminated && length() == optimal_steps; }
  double total_return() const {
    double s = 0;
    for (double r : shared_rewards) s += r;
    return s;
  }
};

struct RolloutOptions {
  ActMode action_mode = ActMode::sample;
  ActMode message_mode = ActMode::sample;
  /// Replace every delivered message with the initial (zero) message.
  bool ablate_messages = false;
  double message_reward_coef = 0.0;
};

/// Called after every environment step with the pre-step state and both
/// agents' outputs; used for rendering and evaluation logs.
using StepObserver = std::function<void(const env::EnvState& before, const std::array<agents::ActOutput, 2>& out,
                                        const std::array<Message, 2>& received, const env::StepResult& result)>;

/// Plays one episode. Messages produced at step t are delivered at t + 1.
template <class Rng>
EpisodeLog rollout(const env::GridConfig& env_cfg, std::uint64_t env_seed, const PolicyNetwork& a0,
                   const PolicyNetwork& a1, const RolloutOptions& opt, Rng& rng,
                   const StepObserver& observer = nullptr) {
  const std::array<const PolicyNetwork*, 2> nets{&a0, &a1};
  auto rs = env::reset(env_cfg, env_seed);
  EpisodeLog log;
  log.initial = rs.state;
  log.optimal_steps = env::optimal_assignment_steps(rs.state);
  env::EnvState state = rs.state;
  auto obs = rs.observations;
  std::array<Message, 2> inbox{agents::initial_message(a0.config()), agents::initial_message(a1.config())};
  const std::array<Message, 2> neutral = inbox;
  for (int a = 0; a < 2; ++a) log.steps[a].reserve(64);
  while (true) {
    std::array<agents::ActOutput, 2> out;
    for (int a = 0; a < 2; ++a) out[a] = nets[a]->act(obs[a], inbox[a], opt.action_mode, opt.message_mode, rng);
    const env::EnvState before = observer ? state : env::EnvState{};
    const auto res = env::step(state, {static_cast<env::Action>(out[0].action), static_cast<env::Action>(out[1].action)});
    for (int a = 0; a < 2; ++a) {
      Transition tr;
      tr.observation = std::move(obs[a]);
      tr.incoming = inbox[a];
      tr.action = out[a].action;
      tr.action_log_prob = out[a].action_log_prob;
      tr.message_tokens = out[a].message_out.tokens;
      tr.message_log_prob = out[a].message_log_prob;
      tr.value = out[a].value;
      tr.reward = res.reward;
      tr.sent = out[a].message_out;
      log.steps[a].push_back(std::move(tr));
    }
    if (opt.message_reward_coef > 0) {
      // Bonus to the sender: how much its message moves the recipient's value.
      for (int s = 0; s < 2; ++s) {
        const int r = 1 - s;
        const Message& m = out[s].message_out;
        if (m.tokens.empty() && m.values.empty()) continue;
        const double v_msg = nets[r]->value_estimate(res.observations[r], m);
        const double v_neutral = nets[r]->value_estimate(res.observations[r], neutral[r]);
        log.steps[s].back().reward += opt.message_reward_coef * std::abs(v_msg - v_neutral);
      }
    }
    log.shared_rewards.push_back(res.reward);
    std::array<Message, 2> received = inbox;
    for (int a = 0; a < 2; ++a) inbox[a] = opt.ablate_messages ? neutral[a] : out[1 - a].message_out;
    if (observer) observer(before, out, received, res);
    obs = res.observations;
    if (res.terminated || res.truncated) {
      log.terminated = res.terminated;
      log.truncated = res.truncated;
      break;
    }
  }
  return log;
}

struct LossDiagnostics {
  double actor = 0;
  double critic = 0;
  double entropy = 0;
  double total = 0;
  bool skipped = false;
};

/// Tape variables of the A2C loss for one agent's episode.
struct LossGraph {
  tensor::Var actor;
  tensor::Var critic;
  tensor::Var entropy;
  tensor::Var total;
  PolicyNetwork::Graph net;
};

/// Rebuilds the agent's forward pass over every step of the episode and
/// records
///   sum_t -(G_t - V_t) (log pi(a_t) + log pi(m_t)) + c_v (G_t - V_t)^2 - c_H H_t
/// with the advantage entering the policy term as a constant.
inline LossGraph build_a2c_loss(agents::Tape& tape, PolicyNetwork& net, std::span<const Transition> steps,
                                const TrainConfig& cfg) {
  const auto& acfg = net.config();
  const int n = static_cast<int>(steps.size());
  if (n == 0) throw UsageError("build_a2c_loss(): empty episode");
  std::vector<double> obs;
  obs.reserve(static_cast<std::size_t>(n) * acfg.observation_size);
  std::vector<double> incoming;
  const int min = acfg.message_input_size();
  incoming.reserve(static_cast<std::size_t>(n) * min);
  std::vector<int> actions(n);
  std::vector<double> rewards(n);
  for (int t = 0; t < n; ++t) {
    obs.insert(obs.end(), steps[t].observation.begin(), steps[t].observation.end());
    if (min > 0) {
      const auto enc = agents::message_input(acfg, steps[t].incoming);
      incoming.insert(incoming.end(), enc.begin(), enc.end());
    }
    actions[t] = steps[t].action;
    rewards[t] = steps[t].reward;
  }
  const auto returns = compute_returns(rewards, cfg.gamma);

  LossGraph lg;
  const auto obs_v = tape.constant(obs, n, acfg.observation_size);
  const auto in_v = min > 0 ? tape.constant(incoming, n, min) : tensor::Var{};
  lg.net = net.forward(tape, obs_v, in_v);

  const auto values = tape.value(lg.net.value);
  std::vector<double> neg_adv(n);
  for (int t = 0; t < n; ++t) neg_adv[t] = -(returns[t] - values[t]);

  const auto logp_all = tape.log_softmax_rows(lg.net.action_logits);
  const auto logp_a = tape.select_cols(logp_all, actions);
  auto actor = tape.sum_all(tape.mul(logp_a, tape.constant(neg_adv, n, 1)));
  const auto probs = tape.softmax_rows(lg.net.action_logits);
  auto neg_entropy = tape.sum_all(tape.mul(probs, logp_all));

  if (acfg.architecture == agents::Architecture::ldc) {
    const int m = acfg.message_count, r = acfg.message_range;
    std::vector<int> tokens;
    tokens.reserve(static_cast<std::size_t>(n) * m);
    std::vector<double> neg_adv_blocks;
    neg_adv_blocks.reserve(tokens.capacity());
    for (int t = 0; t < n; ++t) {
      if (static_cast<int>(steps[t].message_tokens.size()) != m) throw ShapeError("transition message token count mismatch");
      for (int b = 0; b < m; ++b) {
        tokens.push_back(steps[t].message_tokens[b]);
        neg_adv_blocks.push_back(neg_adv[t]);
      }
    }
    const auto blocks = tape.reshape(lg.net.message_logits, n * m, r);
    const auto mlogp_all = tape.log_softmax_rows(blocks);
    const auto mlogp = tape.select_cols(mlogp_all, tokens);
    actor = tape.add(actor, tape.sum_all(tape.mul(mlogp, tape.constant(neg_adv_blocks, n * m, 1))));
    neg_entropy = tape.add(neg_entropy, tape.sum_all(tape.mul(tape.softmax_rows(blocks), mlogp_all)));
  }
  const auto diff = tape.sub(tape.constant(returns, n, 1), lg.net.value);
  lg.actor = actor;
  lg.critic = tape.scale(tape.sum_all(tape.mul(diff, diff)), cfg.value_coef);
  lg.entropy = tape.scale(neg_entropy, -1.0);
  lg.total = tape.add(tape.add(actor, lg.critic), tape.scale(neg_entropy, cfg.entropy_coef));
  return lg;
}

/// One optimizer step for one agent from its episode record.
/// Non-finite losses or gradients skip the update and leave parameters untouched.
inline LossDiagnostics episode_update(PolicyNetwork& net, tensor::Optimizer<double>& opt,
                                      std::span<const Transition> steps, const TrainConfig& cfg, long episode) {
  thread_local agents::Tape tape;
  tape.clear();
  LossDiagnostics d;
  const LossGraph lg = build_a2c_loss(tape, net, steps, cfg);
  d.actor = tape.scalar(lg.actor);
  d.critic = tape.scalar(lg.critic);
  d.entropy = tape.scalar(lg.entropy);
  d.total = tape.scalar(lg.total);
  if (!std::isfinite(d.total)) {
    log::warn("episode " + std::to_string(episode) + ": non-finite loss, update skipped");
    d.skipped = true;
    return d;
  }
  net.params().zero_grad();
  tape.backward(lg.total);
  if (cfg.max_grad_norm > 0) tensor::clip_grad_norm(net.params(), cfg.max_grad_norm);
  try {
    opt.step(net.params(), lr_schedule(episode, cfg));
  } catch (const NumericError& e) {
    log::warn("episode " + std::to_string(episode) + ": " + e.what());
    net.params().zero_grad();
    d.skipped = true;
  }
  return d;
}

struct EpisodeMetrics {
  long episode = 0;
  double total_return = 0;
  int length = 0;
  bool terminated = false;
  bool direct_success = false;
  double lr = 0;
  std::array<LossDiagnostics, 2> loss{};
};

/// Both agents plus their optimizers.
struct AgentPair {
  std::array<PolicyNetwork, 2> nets;
  std::array<tensor::Optimizer<double>, 2> optimizers;

  AgentPair(const agents::AgentConfig& cfg, std::uint64_t seed, tensor::OptimizerConfig ocfg = {})
      : nets{PolicyNetwork(cfg, derive_seed(seed, kStreamInit, 0)), PolicyNetwork(cfg, derive_seed(seed, kStreamInit, 1))},
        optimizers{tensor::Optimizer<double>(ocfg), tensor::Optimizer<double>(ocfg)} {}
};

struct TrainHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  /// Called every `checkpoint_every` episodes (and after the last one) with
  /// the number of completed episodes.
  std::function<void(long completed)> on_checkpoint;
  long checkpoint_every = 0;
};

/// Runs cfg.episodes of {reset, sampled rollout, update both agents}.
inline std::vector<EpisodeMetrics> train(const TrainConfig& cfg, const env::GridConfig& env_cfg, AgentPair& pair,
                                         const TrainHooks& hooks = {}) {
  cfg.validate();
  env_cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, kStreamTrainPolicy, 0));
  RolloutOptions ro;
  ro.action_mode = ActMode::sample;
  ro.message_mode = ActMode::sample;
  ro.message_reward_coef = cfg.message_reward_coef;
  std::vector<EpisodeMetrics> metrics;
  metrics.reserve(cfg.episodes);
  for (long ep = 0; ep < cfg.episodes; ++ep) {
    const EpisodeLog log = rollout(env_cfg, derive_seed(cfg.seed, kStreamTrainEnv, ep), pair.nets[0], pair.nets[1], ro, rng);
    EpisodeMetrics m;
    m.episode = ep;
    m.total_return = log.total_return();
    m.length = log.length();
    m.terminated = log.terminated;
    m.direct_success = log.direct_success();
    m.lr = lr_schedule(ep, cfg);
    for (int a = 0; a < 2; ++a) m.loss[a] = episode_update(pair.nets[a], pair.optimizers[a], log.steps[a], cfg, ep);
    metrics.push_back(m);
    if (hooks.on_episode) hooks.on_episode(m);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
        ((ep + 1) % hooks.checkpoint_every == 0 || ep + 1 == cfg.episodes)) {
      hooks.on_checkpoint(ep + 1);
    }
  }
  return metrics;
}

}  // namespace marl::training
