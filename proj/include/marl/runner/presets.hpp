#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "marl/errors.hpp"

namespace marl::runner {

using json = nlohmann::json;

/// Bundled reproduction presets. Each preset is data only:
///   base      flat config keys shared by every training
///   budgets   smoke / paper / dry overrides (dry trains nothing)
///   trainings named config overrides, one trained pair per seed each
///   rows      report rows: which training, live or ablated evaluation, and
///             the published value per measure
///
/// Budgets were calibrated on a single desktop core; see README.
inline const char* kPresetData = R"json(
{
  "t3": {
    "title": "LDC with and without communication, fully observable 6x6",
    "measures": ["direct_success_rate", "avg_steps"],
    "base": {
      "format_version": 1,
      "env.size": 6,
      "env.vision_range": "inf",
      "env.legacy_layout": true,
      "agent.architecture": "ldc",
      "agent.message_range": 2,
      "agent.message_count": 1,
      "train.lr0": 0.001,
      "train.gamma": 0.95,
      "train.entropy_coef": 0.001,
      "eval.action_mode": "greedy",
      "eval.ablation": true
    },
    "budgets": {
      "dry": {"train.episodes": 0, "eval.episodes": 0, "seeds": [0]},
      "smoke": {"train.episodes": 300, "eval.episodes": 200, "eval.log_episodes": 50, "seeds": [0]},
      "paper": {"train.episodes": 1500000, "eval.episodes": 10000, "seeds": [0, 1, 2]}
    },
    "trainings": {"ldc": {}},
    "rows": [
      {"label": "With Messages", "training": "ldc", "messages": "live",
       "paper": {"direct_success_rate": 0.894, "avg_steps": 4.39}},
      {"label": "Messages Ablated (Set to 0)", "training": "ldc", "messages": "ablated",
       "paper": {"direct_success_rate": 0.886, "avg_steps": 4.43}}
    ]
  },
  "t4": {
    "title": "LDC with and without communication, partially observable 6x6, vision range 3",
    "measures": ["direct_success_rate", "success_rate"],
    "base": {
      "format_version": 1,
      "env.size": 6,
      "env.vision_range": 3,
      "agent.architecture": "ldc",
      "agent.message_range": 2,
      "agent.message_count": 1,
      "train.lr0": 0.001,
      "train.gamma": 0.95,
      "train.entropy_coef": 0.001,
      "eval.action_mode": "greedy",
      "eval.ablation": true
    },
    "budgets": {
      "dry": {"train.episodes": 0, "eval.episodes": 0, "seeds": [0]},
      "smoke": {"train.episodes": 300, "eval.episodes": 200, "eval.log_episodes": 50, "seeds": [0]},
      "paper": {"train.episodes": 400000, "eval.episodes": 10000, "seeds": [0, 1, 2, 3, 4]}
    },
    "trainings": {"ldc": {}},
    "rows": [
      {"label": "With Messages", "training": "ldc", "messages": "live",
       "paper": {"direct_success_rate": 0.3189}},
      {"label": "Messages Ablated (Set to 0)", "training": "ldc", "messages": "ablated",
       "paper": {"direct_success_rate": 0.3026}}
    ]
  },
  "t5": {
    "title": "Success rates in partially observable environments of increasing size, vision range 2",
    "measures": ["success_rate", "direct_success_rate"],
    "base": {
      "format_version": 1,
      "env.vision_range": 2,
      "env.max_cycles": 200,
      "agent.message_range": 2,
      "agent.message_count": 1,
      "train.lr0": 0.001,
      "train.entropy_coef": 0.001,
      "eval.action_mode": "greedy",
      "eval.ablation": false
    },
    "budgets": {
      "dry": {"train.episodes": 0, "eval.episodes": 0, "seeds": [0]},
      "smoke": {"train.episodes": 100, "eval.episodes": 100, "eval.log_episodes": 20, "seeds": [0]},
      "paper": {"train.episodes": 20000, "eval.episodes": 5000, "seeds": [0]}
    },
    "trainings": {
      "10x10 baseline": {"env.size": 10, "agent.architecture": "baseline"},
      "10x10 ldc": {"env.size": 10, "agent.architecture": "ldc"},
      "10x10 intention": {"env.size": 10, "agent.architecture": "intention"},
      "15x15 baseline": {"env.size": 15, "agent.architecture": "baseline"},
      "15x15 ldc": {"env.size": 15, "agent.architecture": "ldc"},
      "15x15 intention": {"env.size": 15, "agent.architecture": "intention"}
    },
    "rows": [
      {"label": "10x10 Baseline", "training": "10x10 baseline", "messages": "live", "paper": {"success_rate": 0.0}},
      {"label": "10x10 Learned Direct Communication", "training": "10x10 ldc", "messages": "live", "paper": {"success_rate": 0.308}},
      {"label": "10x10 Intention Communication", "training": "10x10 intention", "messages": "live", "paper": {"success_rate": 0.999}},
      {"label": "15x15 Baseline", "training": "15x15 baseline", "messages": "live", "paper": {"success_rate": 0.0}},
      {"label": "15x15 Learned Direct Communication", "training": "15x15 ldc", "messages": "live", "paper": {"success_rate": 0.122}},
      {"label": "15x15 Intention Communication", "training": "15x15 intention", "messages": "live", "paper": {"success_rate": 0.965}}
    ]
  },
  "t6": {
    "title": "LDC convergence with varying message capacity, fully observable 6x6",
    "measures": ["converged"],
    "base": {
      "format_version": 1,
      "env.size": 6,
      "env.vision_range": "inf",
      "env.legacy_layout": true,
      "agent.architecture": "ldc",
      "train.lr0": 0.001,
      "train.gamma": 0.95,
      "train.entropy_coef": 0.001,
      "eval.ablation": false
    },
    "budgets": {
      "dry": {"train.episodes": 0, "eval.episodes": 0, "seeds": [0]},
      "smoke": {"train.episodes": 60, "eval.episodes": 0, "eval.convergence_window": 50, "seeds": [0]},
      "paper": {"train.episodes": 400000, "eval.episodes": 0, "seeds": [0, 1]}
    },
    "trainings": {
      "0-1 x1": {"agent.message_range": 2, "agent.message_count": 1},
      "0-1 x2": {"agent.message_range": 2, "agent.message_count": 2},
      "0-1 x4": {"agent.message_range": 2, "agent.message_count": 4},
      "0-4 x1": {"agent.message_range": 5, "agent.message_count": 1},
      "0-4 x2": {"agent.message_range": 5, "agent.message_count": 2},
      "0-9 x1": {"agent.message_range": 10, "agent.message_count": 1}
    },
    "rows": [
      {"label": "0-1 & 1", "training": "0-1 x1", "messages": "live", "paper": {"converged": "Yes"}},
      {"label": "0-1 & 2", "training": "0-1 x2", "messages": "live", "paper": {"converged": "No"}},
      {"label": "0-1 & 4", "training": "0-1 x4", "messages": "live", "paper": {"converged": "No"}},
      {"label": "0-4 & 1", "training": "0-4 x1", "messages": "live", "paper": {"converged": "No"}},
      {"label": "0-4 & 2", "training": "0-4 x2", "messages": "live", "paper": {"converged": "No"}},
      {"label": "0-9 & 1", "training": "0-9 x1", "messages": "live", "paper": {"converged": "No"}}
    ]
  }
}
)json";

inline const json& presets() {
  static const json data = json::parse(kPresetData);
  return data;
}

inline std::vector<std::string> preset_ids() {
  std::vector<std::string> ids;
  for (auto it = presets().begin(); it != presets().end(); ++it) ids.push_back(it.key());
  return ids;
}

inline const json& preset(const std::string& id) {
  if (!presets().contains(id)) {
    std::string known;
    for (const auto& k : preset_ids()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown table id '" + id + "' (expected one of " + known + ")");
  }
  return presets()[id];
}

}  // namespace marl::runner
