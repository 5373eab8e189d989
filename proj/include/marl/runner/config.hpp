#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/agents.hpp"
#include "marl/analysis.hpp"
#include "marl/errors.hpp"
#include "marl/gridworld.hpp"
#include "marl/training.hpp"

namespace marl::runner {

using json = nlohmann::json;

inline constexpr int kConfigFormatVersion = 1;

struct EvalConfig {
  int episodes = 10000;
  std::uint64_t seed_base = 1000000;
  agents::ActMode action_mode = agents::ActMode::greedy;
  /// Also evaluate with every delivered message replaced by the neutral one.
  bool ablation = true;
  /// Episodes (from the start of the live evaluation) whose steps go into the
  /// eval JSONL log and the conditional tables.
  int log_episodes = 1000;
  int convergence_window = 1000;
  double convergence_threshold = 0.8;
};

/// Everything one experiment needs. Serialized as flat namespaced JSON keys
/// ("env.size", "train.lr0", ...).
struct ExperimentConfig {
  std::string name = "experiment";
  env::GridConfig env;
  agents::AgentConfig agent;
  /// <= 0 means 1 / (env.size - 1).
  double observation_scale = 0;
  training::TrainConfig train;
  long checkpoint_every = 0;
  EvalConfig eval;
  std::string output_dir = "runs";
  bool svg = true;
  std::vector<std::uint64_t> seeds{0};

  /// Agent config with the observation width and scale filled in from env.
  agents::AgentConfig resolved_agent() const {
    agents::AgentConfig a = agent;
    a.observation_size = env.observation_size();
    a.observation_scale = observation_scale > 0 ? observation_scale : 1.0 / static_cast<double>(env.size - 1);
    return a;
  }

  void validate() const {
    env.validate();
    resolved_agent().validate();
    if (train.episodes < 0) throw ConfigError("train.episodes must be >= 0");
    // 0 episodes is a dry run: nothing is trained or evaluated.
    training::TrainConfig t = train;
    t.episodes = std::max(1, t.episodes);
    t.validate();
    if (eval.episodes < 0) throw ConfigError("eval.episodes must be >= 0");
    if (eval.log_episodes < 0) throw ConfigError("eval.log_episodes must be >= 0");
    if (seeds.empty()) throw ConfigError("seeds must contain at least one seed");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  }
};

namespace detail {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline const std::vector<EnumName<env::CoordinateMode>> kCoordinateModes{{env::CoordinateMode::relative, "relative"},
                                                                         {env::CoordinateMode::absolute, "absolute"}};
inline const std::vector<EnumName<env::VisibilityMode>> kVisibilityModes{
    {env::VisibilityMode::own_view, "own_view"}, {env::VisibilityMode::teammate_goal_only, "teammate_goal_only"}};
inline const std::vector<EnumName<env::VisionMetric>> kVisionMetrics{{env::VisionMetric::chebyshev, "chebyshev"},
                                                                     {env::VisionMetric::manhattan, "manhattan"}};
inline const std::vector<EnumName<agents::MessageRouting>> kRoutings{
    {agents::MessageRouting::own_fresh, "own_fresh"}, {agents::MessageRouting::teammate_delayed_only, "teammate_delayed_only"}};
inline const std::vector<EnumName<agents::ActMode>> kActModes{{agents::ActMode::greedy, "greedy"},
                                                              {agents::ActMode::sample, "sample"}};
inline const std::vector<EnumName<tensor::OptimizerKind>> kOptimizers{{tensor::OptimizerKind::adam, "adam"},
                                                                      {tensor::OptimizerKind::sgd, "sgd"}};

template <class E>
std::string enum_to_string(const std::vector<EnumName<E>>& table, E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  throw ConfigError("unnamed enum value");
}

template <class E>
E enum_from_json(const std::vector<EnumName<E>>& table, const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key + ": expected a string");
  const auto s = j.get<std::string>();
  std::string allowed;
  for (const auto& e : table) {
    if (s == e.name) return e.value;
    allowed += (allowed.empty() ? "" : ", ") + std::string(e.name);
  }
  throw ConfigError(key + ": unknown value '" + s + "' (expected one of " + allowed + ")");
}

inline long long get_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(key + ": expected an integer");
  return j.get<long long>();
}

inline double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key + ": expected a number");
  return j.get<double>();
}

inline bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key + ": expected true or false");
  return j.get<bool>();
}

inline std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key + ": expected a string");
  return j.get<std::string>();
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  using namespace detail;
  json j;
  j["format_version"] = kConfigFormatVersion;
  j["name"] = c.name;
  j["env.size"] = c.env.size;
  j["env.vision_range"] = c.env.vision_range == env::kUnlimitedVision ? json("inf") : json(c.env.vision_range);
  j["env.coordinate_mode"] = enum_to_string(kCoordinateModes, c.env.coordinate_mode);
  j["env.visibility_mode"] = enum_to_string(kVisibilityModes, c.env.visibility_mode);
  j["env.vision_metric"] = enum_to_string(kVisionMetrics, c.env.vision_metric);
  j["env.max_cycles"] = c.env.max_cycles;
  j["env.frame_stack"] = c.env.frame_stack;
  j["env.legacy_layout"] = c.env.legacy_layout;
  j["agent.architecture"] = agents::architecture_name(c.agent.architecture);
  j["agent.hidden_units"] = c.agent.hidden_units;
  j["agent.hidden_layers"] = c.agent.hidden_layers;
  j["agent.separate_critic"] = c.agent.separate_critic;
  j["agent.message_range"] = c.agent.message_range;
  j["agent.message_count"] = c.agent.message_count;
  j["agent.message_dim"] = c.agent.message_dim;
  j["agent.latent_dim"] = c.agent.latent_dim;
  j["agent.horizon"] = c.agent.horizon;
  j["agent.attention_heads"] = c.agent.attention_heads;
  j["agent.message_routing"] = enum_to_string(kRoutings, c.agent.message_routing);
  j["agent.observation_scale"] = c.observation_scale > 0 ? json(c.observation_scale) : json("auto");
  j["train.episodes"] = c.train.episodes;
  j["train.lr0"] = c.train.lr0;
  j["train.lr_min"] = c.train.lr_min;
  j["train.gamma"] = c.train.gamma;
  j["train.value_coef"] = c.train.value_coef;
  j["train.entropy_coef"] = c.train.entropy_coef;
  j["train.optimizer"] = enum_to_string(kOptimizers, c.train.optimizer);
  j["train.max_grad_norm"] = c.train.max_grad_norm;
  j["train.message_reward_coef"] = c.train.message_reward_coef;
  j["train.checkpoint_every"] = c.checkpoint_every;
  j["eval.episodes"] = c.eval.episodes;
  j["eval.seed_base"] = c.eval.seed_base;
  j["eval.action_mode"] = enum_to_string(kActModes, c.eval.action_mode);
  j["eval.ablation"] = c.eval.ablation;
  j["eval.log_episodes"] = c.eval.log_episodes;
  j["eval.convergence_window"] = c.eval.convergence_window;
  j["eval.convergence_threshold"] = c.eval.convergence_threshold;
  j["output.dir"] = c.output_dir;
  j["output.svg"] = c.svg;
  j["seeds"] = c.seeds;
  return j;
}

/// Applies the given flat keys on top of `c`. Unknown keys are rejected.
inline void apply_json(ExperimentConfig& c, const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "format_version") {
      if (get_int(v, k) != kConfigFormatVersion) {
        throw ConfigError("format_version: unsupported version " + v.dump() + " (expected " +
                          std::to_string(kConfigFormatVersion) + ")");
      }
    } else if (k == "name") {
      c.name = get_string(v, k);
    } else if (k == "env.size") {
      c.env.size = static_cast<int>(get_int(v, k));
    } else if (k == "env.vision_range") {
      if (v.is_string() && v.get<std::string>() == "inf") {
        c.env.vision_range = env::kUnlimitedVision;
      } else if (v.is_null()) {
        c.env.vision_range = env::kUnlimitedVision;
      } else {
        c.env.vision_range = static_cast<int>(get_int(v, k));
      }
    } else if (k == "env.coordinate_mode") {
      c.env.coordinate_mode = enum_from_json(kCoordinateModes, v, k);
    } else if (k == "env.visibility_mode") {
      c.env.visibility_mode = enum_from_json(kVisibilityModes, v, k);
    } else if (k == "env.vision_metric") {
      c.env.vision_metric = enum_from_json(kVisionMetrics, v, k);
    } else if (k == "env.max_cycles") {
      c.env.max_cycles = static_cast<int>(get_int(v, k));
    } else if (k == "env.frame_stack") {
      c.env.frame_stack = static_cast<int>(get_int(v, k));
    } else if (k == "env.legacy_layout") {
      c.env.legacy_layout = get_bool(v, k);
    } else if (k == "agent.architecture") {
      c.agent.architecture = agents::parse_architecture(get_string(v, k));
    } else if (k == "agent.hidden_units") {
      c.agent.hidden_units = static_cast<int>(get_int(v, k));
    } else if (k == "agent.hidden_layers") {
      c.agent.hidden_layers = static_cast<int>(get_int(v, k));
    } else if (k == "agent.separate_critic") {
      c.agent.separate_critic = get_bool(v, k);
    } else if (k == "agent.message_range") {
      c.agent.message_range = static_cast<int>(get_int(v, k));
    } else if (k == "agent.message_count") {
      c.agent.message_count = static_cast<int>(get_int(v, k));
    } else if (k == "agent.message_dim") {
      c.agent.message_dim = static_cast<int>(get_int(v, k));
    } else if (k == "agent.latent_dim") {
      c.agent.latent_dim = static_cast<int>(get_int(v, k));
    } else if (k == "agent.horizon") {
      c.agent.horizon = static_cast<int>(get_int(v, k));
    } else if (k == "agent.attention_heads") {
      c.agent.attention_heads = static_cast<int>(get_int(v, k));
    } else if (k == "agent.message_routing") {
      c.agent.message_routing = enum_from_json(kRoutings, v, k);
    } else if (k == "agent.observation_scale") {
      c.observation_scale = v.is_string() && v.get<std::string>() == "auto" ? 0.0 : get_number(v, k);
    } else if (k == "train.episodes") {
      c.train.episodes = static_cast<int>(get_int(v, k));
    } else if (k == "train.lr0") {
      c.train.lr0 = get_number(v, k);
    } else if (k == "train.lr_min") {
      c.train.lr_min = get_number(v, k);
    } else if (k == "train.gamma") {
      c.train.gamma = get_number(v, k);
    } else if (k == "train.value_coef") {
      c.train.value_coef = get_number(v, k);
    } else if (k == "train.entropy_coef") {
      c.train.entropy_coef = get_number(v, k);
    } else if (k == "train.optimizer") {
      c.train.optimizer = enum_from_json(kOptimizers, v, k);
    } else if (k == "train.max_grad_norm") {
      c.train.max_grad_norm = get_number(v, k);
    } else if (k == "train.message_reward_coef") {
      c.train.message_reward_coef = get_number(v, k);
    } else if (k == "train.checkpoint_every") {
      c.checkpoint_every = static_cast<long>(get_int(v, k));
    } else if (k == "eval.episodes") {
      c.eval.episodes = static_cast<int>(get_int(v, k));
    } else if (k == "eval.seed_base") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError(k + ": expected a non-negative integer");
      }
      c.eval.seed_base = v.get<std::uint64_t>();
    } else if (k == "eval.action_mode") {
      c.eval.action_mode = enum_from_json(kActModes, v, k);
    } else if (k == "eval.ablation") {
      c.eval.ablation = get_bool(v, k);
    } else if (k == "eval.log_episodes") {
      c.eval.log_episodes = static_cast<int>(get_int(v, k));
    } else if (k == "eval.convergence_window") {
      c.eval.convergence_window = static_cast<int>(get_int(v, k));
    } else if (k == "eval.convergence_threshold") {
      c.eval.convergence_threshold = get_number(v, k);
    } else if (k == "output.dir") {
      c.output_dir = get_string(v, k);
    } else if (k == "output.svg") {
      c.svg = get_bool(v, k);
    } else if (k == "seeds") {
      if (!v.is_array()) throw ConfigError("seeds: expected an array of non-negative integers");
      c.seeds.clear();
      for (const auto& s : v) {
        if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("seeds: expected non-negative integers");
        c.seeds.push_back(s.get<std::uint64_t>());
      }
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
}

/// Full config document: format_version and env.size are required.
inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const char* required : {"format_version", "env.size"}) {
    if (!j.contains(required)) throw ConfigError(std::string("missing required key '") + required + "'");
  }
  ExperimentConfig c;
  apply_json(c, j);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace marl::runner
