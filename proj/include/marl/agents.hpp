#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marl/errors.hpp"
#include "marl/gridworld.hpp"
#include "marl/tensor/distributions.hpp"
#include "marl/tensor/layers.hpp"
#include "marl/tensor/param_store.hpp"
#include "marl/tensor/tape.hpp"

namespace marl::agents {

using tensor::Var;
using Tape = tensor::Tape<double>;
using Store = tensor::ParamStore<double>;

enum class Architecture { baseline, ldc, intention };

/// Which message the intention trunk consumes: the agent's own freshly
/// generated m_t, or only the teammate's delayed m_{t-1}.
enum class MessageRouting { own_fresh, teammate_delayed_only };

enum class ActMode { sample, greedy };

inline const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::baseline:
      return "baseline";
    case Architecture::ldc:
      return "ldc";
    case Architecture::intention:
      return "intention";
  }
  return "?";
}

inline Architecture parse_architecture(const std::string& s) {
  if (s == "baseline") return Architecture::baseline;
  if (s == "ldc") return Architecture::ldc;
  if (s == "intention") return Architecture::intention;
  throw ConfigError("unknown architecture '" + s + "' (expected baseline, ldc or intention)");
}

struct AgentConfig {
  Architecture architecture = Architecture::baseline;
  int observation_size = 16;
  /// Multiplies the raw observation before the first layer.
  double observation_scale = 1.0;
  int hidden_units = 64;
  int hidden_layers = 2;
  bool separate_critic = false;

  // LDC: message_count tokens, each in [0, message_range).
  int message_range = 2;
  int message_count = 1;

  // Intention communication.
  int message_dim = 8;
  int latent_dim = 32;
  int horizon = 4;
  int attention_heads = 2;
  MessageRouting message_routing = MessageRouting::own_fresh;

  /// Width of the incoming-message input (0 for the baseline).
  int message_input_size() const {
    switch (architecture) {
      case Architecture::ldc:
        return message_range * message_count;
      case Architecture::intention:
        return message_dim;
      case Architecture::baseline:
        break;
    }
    return 0;
  }

  int trunk_input_size() const {
    return observation_size + message_input_size();
  }

  void validate() const {
    if (observation_size <= 0) throw ConfigError("agent observation size must be positive");
    if (hidden_units <= 0 || hidden_layers <= 0) throw ConfigError("agent.hidden_units and agent.hidden_layers must be positive");
    if (!std::isfinite(observation_scale) || observation_scale <= 0) throw ConfigError("agent.observation_scale must be positive");
    if (architecture == Architecture::ldc && (message_range < 2 || message_count < 1)) {
      throw ConfigError("agent.message_range must be >= 2 and agent.message_count >= 1");
    }
    if (architecture == Architecture::intention) {
      if (message_dim < 1 || latent_dim < 1 || horizon < 1) {
        throw ConfigError("agent.message_dim, agent.latent_dim and agent.horizon must be >= 1");
      }
      tensor::AttentionConfig{latent_dim, attention_heads}.validate();
    }
  }
};

/// LDC messages carry tokens, intention messages carry real values; the
/// baseline sends nothing.
struct Message {
  std::vector<int> tokens;
  std::vector<double> values;

  friend bool operator==(const Message&, const Message&) = default;
};

/// The message assumed to have been received before the first timestep, and
/// the value substituted for every delivered message under ablation.
inline Message initial_message(const AgentConfig& cfg) {
  Message m;
  if (cfg.architecture == Architecture::ldc) m.tokens.assign(cfg.message_count, 0);
  if (cfg.architecture == Architecture::intention) m.values.assign(cfg.message_dim, 0.0);
  return m;
}

/// Network-input encoding: concatenated one-hots (LDC) or the raw vector.
inline std::vector<double> message_input(const AgentConfig& cfg, const Message& m) {
  std::vector<double> out(cfg.message_input_size(), 0.0);
  if (cfg.architecture == Architecture::ldc) {
    if (static_cast<int>(m.tokens.size()) != cfg.message_count) {
      throw ShapeError("LDC message has " + std::to_string(m.tokens.size()) + " tokens, expected " +
                       std::to_string(cfg.message_count));
    }
    for (int b = 0; b < cfg.message_count; ++b) {
      const int tok = m.tokens[b];
      if (tok < 0 || tok >= cfg.message_range) {
        throw DomainError("message token " + std::to_string(tok) + " outside [0, " + std::to_string(cfg.message_range) + ")");
      }
      out[b * cfg.message_range + tok] = 1.0;
    }
  } else if (cfg.architecture == Architecture::intention) {
    if (static_cast<int>(m.values.size()) != cfg.message_dim) {
      throw ShapeError("intention message has " + std::to_string(m.values.size()) + " values, expected " +
                       std::to_string(cfg.message_dim));
    }
    for (int i = 0; i < cfg.message_dim; ++i) {
      if (!std::isfinite(m.values[i])) throw NumericError("non-finite intention message entry");
      out[i] = m.values[i];
    }
  }
  return out;
}

struct ActOutput {
  std::array<double, env::kNumActions> action_logits{};
  std::array<double, env::kNumActions> action_probs{};
  double value = 0;
  Message message_out;
  /// LDC only: per-block token probabilities, message_count x message_range.
  std::vector<double> message_probs;
  int action = 0;
  double action_log_prob = 0;
  double message_log_prob = 0;
};

/// H x latent_dim latent rollout, row-major.
struct ImaginedTrajectory {
  int horizon = 0;
  int latent_dim = 0;
  std::vector<double> latents;

  std::span<const double> step(int k) const {
    return std::span<const double>(latents).subspan(static_cast<std::size_t>(k) * latent_dim, latent_dim);
  }
};

/// One agent's network: baseline, LDC or intention (ITGM + MGN) variant.
///
/// Inputs are batched row-wise, so the trainer can replay a whole episode in
/// one forward pass. Each agent owns its parameters; nothing is shared.
class PolicyNetwork {
 public:
  struct Graph {
    Var action_logits;   // [n, 5]
    Var value;           // [n, 1]
    Var message_logits;  // LDC: [n, M*R]
    Var message;         // intention: [n, msg_dim], the outgoing m_t
    Var trajectory;      // intention: [n*H, latent]
    Var attention;       // intention: attention node (see Tape::attention_weights)
  };

  PolicyNetwork(const AgentConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    using tensor::Activation;
    using tensor::Dense;
    const int trunk_in = trunk_input_width();
    if (cfg_.architecture == Architecture::intention) {
      encoder_ = Dense::create(store_, "itgm.encoder", cfg_.observation_size + cfg_.message_dim, cfg_.latent_dim,
                               Activation::tanh, rng);
      cell_ = tensor::RecurrentCell::create(store_, "itgm.cell", cfg_.latent_dim, rng);
      attention_ = tensor::MultiHeadAttention::create(store_, "mgn.attention",
                                                      tensor::AttentionConfig{cfg_.latent_dim, cfg_.attention_heads}, rng);
      message_proj_ = Dense::create(store_, "mgn.projection", cfg_.latent_dim, cfg_.message_dim, Activation::tanh, rng);
    }
    int width = trunk_in;
    for (int l = 0; l < cfg_.hidden_layers; ++l) {
      trunk_.push_back(Dense::create(store_, "trunk." + std::to_string(l), width, cfg_.hidden_units, Activation::tanh, rng));
      width = cfg_.hidden_units;
    }
    policy_head_ = Dense::create(store_, "policy", width, env::kNumActions, Activation::identity, rng);
    if (cfg_.architecture == Architecture::ldc) {
      message_head_ = Dense::create(store_, "message", width, cfg_.message_range * cfg_.message_count,
                                    Activation::identity, rng);
    }
    int critic_width = width;
    if (cfg_.separate_critic) {
      critic_width = trunk_in;
      for (int l = 0; l < cfg_.hidden_layers; ++l) {
        critic_trunk_.push_back(
            Dense::create(store_, "critic." + std::to_string(l), critic_width, cfg_.hidden_units, Activation::tanh, rng));
        critic_width = cfg_.hidden_units;
      }
    }
    value_head_ = Dense::create(store_, "value", critic_width, 1, Activation::identity, rng);
  }

  const AgentConfig& config() const { return cfg_; }
  Store& params() { return store_; }
  const Store& params() const { return store_; }

  /// Parameter names of the value branch (value head plus separate critic).
  std::vector<std::string> critic_parameter_names() const {
    std::vector<std::string> names{"value.weight", "value.bias"};
    for (const auto& d : critic_trunk_) {
      names.push_back(store_[d.weight].name);
      names.push_back(store_[d.bias].name);
    }
    return names;
  }

  /// Trainable forward pass over obs [n, obs] and incoming [n, msg_in].
  /// `incoming` is ignored (and may be invalid) for the baseline.
  Graph forward(Tape& tape, Var obs, Var incoming) { return forward_impl(*this, tape, obs, incoming); }
  Graph forward(Tape& tape, Var obs, Var incoming) const { return forward_impl(*this, tape, obs, incoming); }

  /// MGN alone on a trajectory [n*H, latent] -> message [n, msg_dim].
  Var compress(Tape& tape, Var trajectory, Var* attention_node = nullptr) const {
    return compress_impl(*this, tape, trajectory, attention_node);
  }

  /// Single-step evaluation with action and message selection.
  template <class Rng>
  ActOutput act(std::span<const double> observation, const Message& incoming, ActMode action_mode,
                ActMode message_mode, Rng& rng) const {
    thread_local Tape tape;
    tape.clear();
    const Graph g = forward_single(tape, observation, incoming);
    ActOutput out;
    const auto logits = tape.value(g.action_logits);
    std::copy(logits.begin(), logits.end(), out.action_logits.begin());
    const auto probs = tensor::softmax(logits);
    std::copy(probs.begin(), probs.end(), out.action_probs.begin());
    out.action = action_mode == ActMode::sample ? tensor::categorical_sample(std::span<const double>(probs), rng)
                                                : tensor::categorical_greedy(std::span<const double>(probs));
    out.action_log_prob = std::log(probs[out.action]);
    out.value = tape.value(g.value)[0];
    if (!std::isfinite(out.value)) throw NumericError("non-finite value estimate");
    if (cfg_.architecture == Architecture::ldc) {
      const auto ml = tape.value(g.message_logits);
      const int r = cfg_.message_range;
      out.message_out.tokens.resize(cfg_.message_count);
      out.message_probs.resize(ml.size());
      for (int b = 0; b < cfg_.message_count; ++b) {
        const auto p = tensor::softmax(ml.subspan(static_cast<std::size_t>(b) * r, r));
        std::copy(p.begin(), p.end(), out.message_probs.begin() + static_cast<std::ptrdiff_t>(b) * r);
        const int tok = message_mode == ActMode::sample ? tensor::categorical_sample(std::span<const double>(p), rng)
                                                        : tensor::categorical_greedy(std::span<const double>(p));
        out.message_out.tokens[b] = tok;
        out.message_log_prob += std::log(p[tok]);
      }
    } else if (cfg_.architecture == Architecture::intention) {
      const auto m = tape.value(g.message);
      out.message_out.values.assign(m.begin(), m.end());
    }
    return out;
  }

  double value_estimate(std::span<const double> observation, const Message& incoming) const {
    thread_local Tape tape;
    tape.clear();
    const Graph g = forward_single(tape, observation, incoming);
    return tape.value(g.value)[0];
  }

  ImaginedTrajectory rollout(std::span<const double> observation, const Message& incoming) const {
    if (cfg_.architecture != Architecture::intention) throw ConfigError("itgm rollout requires the intention architecture");
    thread_local Tape tape;
    tape.clear();
    const Graph g = forward_single(tape, observation, incoming);
    const auto z = tape.value(g.trajectory);
    return {cfg_.horizon, cfg_.latent_dim, std::vector<double>(z.begin(), z.end())};
  }

 private:
  int trunk_input_width() const {
    if (cfg_.architecture == Architecture::intention) return cfg_.observation_size + cfg_.message_dim;
    return cfg_.trunk_input_size();
  }

  Graph forward_single(Tape& tape, std::span<const double> observation, const Message& incoming) const {
    if (static_cast<int>(observation.size()) != cfg_.observation_size) {
      throw ShapeError("observation has " + std::to_string(observation.size()) + " entries, network expects " +
                       std::to_string(cfg_.observation_size));
    }
    const Var obs = tape.constant(observation, 1, cfg_.observation_size);
    Var in;
    if (cfg_.architecture != Architecture::baseline) {
      const auto enc = message_input(cfg_, incoming);
      in = tape.constant(enc, 1, static_cast<int>(enc.size()));
    }
    return forward(tape, obs, in);
  }

  template <class Self>
  static Var stack(Self& self, Tape& tape, const std::vector<tensor::Dense>& layers, Var x) {
    for (const auto& d : layers) x = tensor::dense_forward(tape, self.store_, d, x);
    return x;
  }

  template <class Self>
  static Var compress_impl(Self& self, Tape& tape, Var trajectory, Var* attention_node) {
    const int h = self.cfg_.horizon;
    const auto att = tensor::self_attention(tape, self.store_, self.attention_, trajectory, h);
    if (attention_node != nullptr) *attention_node = att.weights_node;
    const Var pooled = tape.mean_row_blocks(att.output, h);
    return tensor::dense_forward(tape, self.store_, self.message_proj_, pooled);
  }

  template <class Self>
  static Graph forward_impl(Self& self, Tape& tape, Var obs, Var incoming) {
    const AgentConfig& cfg = self.cfg_;
    if (tape.cols(obs) != cfg.observation_size) {
      throw ShapeError("observation input is " + std::to_string(tape.rows(obs)) + "x" + std::to_string(tape.cols(obs)) +
                       ", network expects width " + std::to_string(cfg.observation_size));
    }
    const int n = tape.rows(obs);
    if (cfg.architecture != Architecture::baseline) {
      if (!incoming.valid() || tape.rows(incoming) != n || tape.cols(incoming) != cfg.message_input_size()) {
        throw ShapeError("incoming message input must be " + std::to_string(n) + "x" +
                         std::to_string(cfg.message_input_size()));
      }
    }
    Graph g;
    const Var x = cfg.observation_scale != 1.0 ? tape.scale(obs, cfg.observation_scale) : obs;
    Var trunk_in = x;
    if (cfg.architecture == Architecture::ldc) {
      trunk_in = tape.concat_cols(x, incoming);
    } else if (cfg.architecture == Architecture::intention) {
      Var z = tensor::dense_forward(tape, self.store_, self.encoder_, tape.concat_cols(x, incoming));
      std::vector<Var> steps;
      steps.reserve(cfg.horizon);
      for (int k = 0; k < cfg.horizon; ++k) {
        z = tensor::recurrent_cell(tape, self.store_, self.cell_, z);
        steps.push_back(z);
      }
      g.trajectory = tape.interleave_rows(steps);
      g.message = compress_impl(self, tape, g.trajectory, &g.attention);
      trunk_in = tape.concat_cols(x, cfg.message_routing == MessageRouting::own_fresh ? g.message : incoming);
    }
    const Var h = stack(self, tape, self.trunk_, trunk_in);
    g.action_logits = tensor::dense_forward(tape, self.store_, self.policy_head_, h);
    if (cfg.architecture == Architecture::ldc) {
      g.message_logits = tensor::dense_forward(tape, self.store_, self.message_head_, h);
    }
    const Var critic_h = cfg.separate_critic ? stack(self, tape, self.critic_trunk_, trunk_in) : h;
    g.value = tensor::dense_forward(tape, self.store_, self.value_head_, critic_h);
    return g;
  }

  AgentConfig cfg_;
  Store store_;
  std::vector<tensor::Dense> trunk_;
  std::vector<tensor::Dense> critic_trunk_;
  tensor::Dense policy_head_;
  tensor::Dense value_head_;
  tensor::Dense message_head_;
  tensor::Dense encoder_;
  tensor::RecurrentCell cell_;
  tensor::MultiHeadAttention attention_;
  tensor::Dense message_proj_;
};

struct AgentIO {
  std::span<const double> observation;
  Message incoming;
};

namespace detail {
inline void require(const PolicyNetwork& net, Architecture a, const char* op) {
  if (net.config().architecture != a) {
    throw ConfigError(std::string(op) + " called on a " + architecture_name(net.config().architecture) + " network");
  }
}
}  // namespace detail

template <class Rng>
ActOutput baseline_act(const PolicyNetwork& net, const AgentIO& io, ActMode mode, Rng& rng) {
  detail::require(net, Architecture::baseline, "baseline_act");
  return net.act(io.observation, io.incoming, mode, mode, rng);
}

template <class Rng>
ActOutput ldc_act(const PolicyNetwork& net, const AgentIO& io, ActMode mode, Rng& rng) {
  detail::require(net, Architecture::ldc, "ldc_act");
  return net.act(io.observation, io.incoming, mode, mode, rng);
}

template <class Rng>
ActOutput intention_act(const PolicyNetwork& net, const AgentIO& io, ActMode mode, Rng& rng) {
  detail::require(net, Architecture::intention, "intention_act");
  return net.act(io.observation, io.incoming, mode, mode, rng);
}

inline ImaginedTrajectory itgm_rollout(const PolicyNetwork& net, std::span<const double> observation,
                                       const Message& incoming) {
  return net.rollout(observation, incoming);
}

inline Message mgn_compress(const PolicyNetwork& net, const ImaginedTrajectory& tau) {
  detail::require(net, Architecture::intention, "mgn_compress");
  const AgentConfig& cfg = net.config();
  if (tau.horizon != cfg.horizon || tau.latent_dim != cfg.latent_dim ||
      tau.latents.size() != static_cast<std::size_t>(tau.horizon) * tau.latent_dim) {
    throw ShapeError("trajectory shape does not match the network's horizon/latent size");
  }
  Tape tape;
  const Var t = tape.constant(tau.latents, tau.horizon, tau.latent_dim);
  const auto m = tape.value(net.compress(tape, t));
  Message out;
  out.values.assign(m.begin(), m.end());
  return out;
}

}  // namespace marl::agents
