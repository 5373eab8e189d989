#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "marl/errors.hpp"

namespace marl::env {

inline constexpr int kNumAgents = 2;
inline constexpr int kNumGoals = 2;
inline constexpr int kNumActions = 5;
/// vision_range value meaning "fully observable".
inline constexpr int kUnlimitedVision = -1;

enum class Action : int { stay = 0, up = 1, down = 2, left = 3, right = 4 };

enum class CoordinateMode { relative, absolute };
enum class VisibilityMode { own_view, teammate_goal_only };
enum class VisionMetric { chebyshev, manhattan };

struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.col - b.col) + std::abs(a.row - b.row); }
inline int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.col - b.col), std::abs(a.row - b.row)); }

struct GridConfig {
  int size = 6;
  int vision_range = kUnlimitedVision;
  CoordinateMode coordinate_mode = CoordinateMode::relative;
  VisibilityMode visibility_mode = VisibilityMode::own_view;
  VisionMetric vision_metric = VisionMetric::chebyshev;
  int max_cycles = 200;
  int frame_stack = 4;
  /// Fully observable only: 4-entry frames [x1, y1, x2, y2] without visibility flags.
  bool legacy_layout = false;

  bool fully_observable() const {
    return vision_range == kUnlimitedVision && visibility_mode == VisibilityMode::own_view;
  }
  int frame_width() const { return legacy_layout ? 4 : 6; }
  int observation_size() const { return frame_width() * frame_stack; }

  void validate() const {
    if (size < 2) throw ConfigError("env.size must be >= 2, got " + std::to_string(size));
    if (max_cycles < 1) throw ConfigError("env.max_cycles must be >= 1, got " + std::to_string(max_cycles));
    if (frame_stack < 1) throw ConfigError("env.frame_stack must be >= 1, got " + std::to_string(frame_stack));
    if (vision_range < 0 && vision_range != kUnlimitedVision) {
      throw ConfigError("env.vision_range must be >= 0 or unlimited, got " + std::to_string(vision_range));
    }
    if (legacy_layout && !fully_observable()) {
      throw ConfigError("env.legacy_layout requires a fully observable own-view configuration");
    }
  }
};

struct GoalView {
  double x = 0;
  double y = 0;
  bool visible = false;
};

/// What one agent sees of the two goals in a single timestep.
struct ObservationFrame {
  std::array<GoalView, kNumGoals> goals{};
};

using StackedObservation = std::vector<double>;

struct EnvState {
  GridConfig config;
  std::array<Cell, kNumAgents> agents{};
  std::array<Cell, kNumGoals> goals{};
  int step_count = 0;
  /// Order in which agent 2 sees the goals; agent 1 always sees {0, 1}.
  std::array<int, kNumGoals> goal_perm{0, 1};
  /// Goal each agent takes in the optimal assignment of the initial state; used
  /// by the teammate_goal_only visibility mode.
  std::array<int, kNumAgents> assigned_goal{0, 1};
  std::uint64_t seed = 0;
  bool finished = false;
  std::array<StackedObservation, kNumAgents> stacked;
};

struct ResetResult {
  EnvState state;
  std::array<StackedObservation, kNumAgents> observations;
};

struct StepResult {
  std::array<StackedObservation, kNumAgents> observations;
  double reward = 0;
  bool terminated = false;
  bool truncated = false;
};

inline constexpr double kSuccessReward = 1.0;
inline constexpr double kSameGoalReward = -0.10;
inline constexpr double kStepReward = -0.01;

inline Cell move(Cell c, Action a, int size) {
  switch (a) {
    case Action::up:
      c.row = std::max(0, c.row - 1);
      break;
    case Action::down:
      c.row = std::min(size - 1, c.row + 1);
      break;
    case Action::left:
      c.col = std::max(0, c.col - 1);
      break;
    case Action::right:
      c.col = std::min(size - 1, c.col + 1);
      break;
    case Action::stay:
      break;
  }
  return c;
}

/// Index of the goal at `c`, or -1.
inline int goal_at(const EnvState& s, Cell c) {
  for (int g = 0; g < kNumGoals; ++g) {
    if (s.goals[g] == c) return g;
  }
  return -1;
}

inline bool agents_on_distinct_goals(const EnvState& s) {
  const int g0 = goal_at(s, s.agents[0]);
  const int g1 = goal_at(s, s.agents[1]);
  return g0 >= 0 && g1 >= 0 && g0 != g1;
}

/// Cost of each goal assignment: [0] = agent1->goal0/agent2->goal1, [1] = swapped.
inline std::array<int, 2> assignment_costs(const EnvState& s) {
  return {std::max(manhattan(s.agents[0], s.goals[0]), manhattan(s.agents[1], s.goals[1])),
          std::max(manhattan(s.agents[0], s.goals[1]), manhattan(s.agents[1], s.goals[0]))};
}

/// Fewest synchronized steps after which both agents can stand on distinct
/// goals. Success is evaluated after a step, so the result is at least 1.
inline int optimal_assignment_steps(const EnvState& s) {
  const auto c = assignment_costs(s);
  return std::max(1, std::min(c[0], c[1]));
}

inline ObservationFrame observe(const EnvState& s, int agent_id) {
  if (agent_id < 0 || agent_id >= kNumAgents) throw DomainError("observe(): agent id " + std::to_string(agent_id));
  const GridConfig& cfg = s.config;
  const Cell me = s.agents[agent_id];
  ObservationFrame f;
  for (int slot = 0; slot < kNumGoals; ++slot) {
    const int g = agent_id == 0 ? slot : s.goal_perm[slot];
    const Cell goal = s.goals[g];
    bool visible = true;
    if (cfg.vision_range != kUnlimitedVision) {
      const int d = cfg.vision_metric == VisionMetric::chebyshev ? chebyshev(me, goal) : manhattan(me, goal);
      visible = d <= cfg.vision_range;
    }
    if (cfg.visibility_mode == VisibilityMode::teammate_goal_only && g == s.assigned_goal[agent_id]) {
      visible = false;
    }
    GoalView& v = f.goals[slot];
    v.visible = visible;
    if (visible) {
      if (cfg.coordinate_mode == CoordinateMode::relative) {
        v.x = goal.col - me.col;
        v.y = goal.row - me.row;
      } else {
        v.x = goal.col;
        v.y = goal.row;
      }
    }
  }
  return f;
}

inline void append_frame(const GridConfig& cfg, const ObservationFrame& f, std::vector<double>& out) {
  for (const GoalView& g : f.goals) {
    out.push_back(g.x);
    out.push_back(g.y);
    if (!cfg.legacy_layout) out.push_back(g.visible ? 1.0 : 0.0);
  }
}

inline std::vector<double> flatten(const GridConfig& cfg, const ObservationFrame& f) {
  std::vector<double> out;
  out.reserve(cfg.frame_width());
  append_frame(cfg, f, out);
  return out;
}

namespace detail {

inline void push_frames(EnvState& s) {
  const int w = s.config.frame_width();
  for (int a = 0; a < kNumAgents; ++a) {
    auto& st = s.stacked[a];
    const auto frame = flatten(s.config, observe(s, a));
    if (st.empty()) {
      for (int k = 0; k < s.config.frame_stack; ++k) st.insert(st.end(), frame.begin(), frame.end());
    } else {
      std::copy(st.begin() + w, st.end(), st.begin());
      std::copy(frame.begin(), frame.end(), st.end() - w);
    }
  }
}

}  // namespace detail

/// Places the agents uniformly on two distinct cells and, independently, the
/// goals on two distinct cells.
inline ResetResult reset(const GridConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int cells = cfg.size * cfg.size;
  std::uniform_int_distribution<int> first(0, cells - 1);
  std::uniform_int_distribution<int> second(0, cells - 2);
  auto draw_pair = [&](std::array<Cell, 2>& out) {
    const int a = first(rng);
    int b = second(rng);
    if (b >= a) ++b;
    out[0] = Cell{a % cfg.size, a / cfg.size};
    out[1] = Cell{b % cfg.size, b / cfg.size};
  };
  EnvState s;
  s.config = cfg;
  s.seed = seed;
  draw_pair(s.agents);
  draw_pair(s.goals);
  std::bernoulli_distribution coin(0.5);
  if (coin(rng)) s.goal_perm = {1, 0};
  const auto costs = assignment_costs(s);
  s.assigned_goal = costs[1] < costs[0] ? std::array<int, 2>{1, 0} : std::array<int, 2>{0, 1};
  detail::push_frames(s);
  return {s, s.stacked};
}

inline StepResult step(EnvState& s, const std::array<Action, kNumAgents>& actions) {
  if (s.finished) throw UsageError("step() called on a finished episode; call reset()");
  for (Action a : actions) {
    const int v = static_cast<int>(a);
    if (v < 0 || v >= kNumActions) throw DomainError("step(): invalid action " + std::to_string(v));
  }
  for (int a = 0; a < kNumAgents; ++a) s.agents[a] = move(s.agents[a], actions[a], s.config.size);
  ++s.step_count;

  StepResult r;
  const int g0 = goal_at(s, s.agents[0]);
  const int g1 = goal_at(s, s.agents[1]);
  if (g0 >= 0 && g1 >= 0 && g0 != g1) {
    r.reward = kSuccessReward;
    r.terminated = true;
  } else if (g0 >= 0 && g0 == g1) {
    r.reward = kSameGoalReward;
  } else {
    r.reward = kStepReward;
  }
  r.truncated = !r.terminated && s.step_count >= s.config.max_cycles;
  s.finished = r.terminated || r.truncated;
  detail::push_frames(s);
  r.observations = s.stacked;
  return r;
}

/// Text grid, one line per row: A/B agents, 1/2 goals, * agent on a goal.
inline std::string render(const EnvState& s) {
  const int n = s.config.size;
  std::string out;
  out.reserve(static_cast<std::size_t>(n) * (n + 1));
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const Cell c{col, row};
      const bool goal = goal_at(s, c) >= 0;
      const bool a0 = s.agents[0] == c;
      const bool a1 = s.agents[1] == c;
      char ch = '.';
      if (goal && (a0 || a1)) {
        ch = '*';
      } else if (a0) {
        ch = 'A';
      } else if (a1) {
        ch = 'B';
      } else if (goal) {
        ch = static_cast<char>('1' + goal_at(s, c));
      }
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

inline const char* action_name(Action a) {
  static constexpr const char* names[] = {"Stay", "Up", "Down", "Left", "Right"};
  return names[static_cast<int>(a)];
}

}  // namespace marl::env
