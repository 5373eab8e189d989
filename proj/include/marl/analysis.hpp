#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marl/agents.hpp"
#include "marl/errors.hpp"
#include "marl/gridworld.hpp"
#include "marl/training.hpp"

namespace marl::analysis {

using agents::ActMode;
using agents::PolicyNetwork;

enum class MessageMode { live, ablated };

struct EvalSettings {
  int episodes = 10000;
  std::uint64_t seed_base = 1000000;
  MessageMode message_mode = MessageMode::live;
  ActMode action_mode = ActMode::greedy;
  ActMode message_selection = ActMode::greedy;
};

/// 95% Wilson score interval for a binomial proportion.
struct Interval {
  double low = 0;
  double high = 0;
  double half_width() const { return 0.5 * (high - low); }
};

inline Interval wilson_interval(long successes, long n, double z = 1.959963984540054) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double denom = 1 + z * z / nn;
  const double center = (p + z * z / (2 * nn)) / denom;
  const double hw = z / denom * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn));
  return {std::max(0.0, center - hw), std::min(1.0, center + hw)};
}

struct EpisodeOutcome {
  bool terminated = false;
  int length = 0;
  int optimal_steps = 0;

  bool direct() const { return terminated && length == optimal_steps; }
};

struct EvalReport {
  long episodes = 0;
  long successes = 0;
  long direct_successes = 0;
  double success_rate = 0;
  double direct_success_rate = 0;
  /// Mean length of direct-success episodes; NaN when there are none.
  double avg_steps = std::numeric_limits<double>::quiet_NaN();
  /// Mean length of all successful episodes; NaN when there are none.
  double avg_success_steps = std::numeric_limits<double>::quiet_NaN();
  Interval success_ci;
  Interval direct_ci;
};

inline EvalReport summarize(std::span<const EpisodeOutcome> outcomes) {
  EvalReport r;
  r.episodes = static_cast<long>(outcomes.size());
  double direct_len = 0, success_len = 0;
  for (const auto& o : outcomes) {
    if (o.terminated) {
      ++r.successes;
      success_len += o.length;
    }
    if (o.direct()) {
      ++r.direct_successes;
      direct_len += o.length;
    }
  }
  if (r.episodes > 0) {
    r.success_rate = static_cast<double>(r.successes) / static_cast<double>(r.episodes);
    r.direct_success_rate = static_cast<double>(r.direct_successes) / static_cast<double>(r.episodes);
  }
  if (r.direct_successes > 0) r.avg_steps = direct_len / static_cast<double>(r.direct_successes);
  if (r.successes > 0) r.avg_success_steps = success_len / static_cast<double>(r.successes);
  r.success_ci = wilson_interval(r.successes, r.episodes);
  r.direct_ci = wilson_interval(r.direct_successes, r.episodes);
  return r;
}

/// One agent's view of one evaluation step, as written to the eval JSONL log.
struct EvalStepRecord {
  int episode = 0;
  int t = 0;
  int agent = 0;
  std::vector<int> received;  // LDC tokens delivered to this agent (after ablation)
  int action = 0;
  std::vector<int> sent;
  double reward = 0;
};

/// Per-episode summary written next to the step records.
struct EvalEpisodeRecord {
  int episode = 0;
  env::EnvState initial;
  int length = 0;
  bool terminated = false;
  int optimal_steps = 0;
};

struct EvalLog {
  /// Only the first `max_episodes` episodes are recorded.
  int max_episodes = std::numeric_limits<int>::max();
  std::vector<EvalStepRecord> steps;
  std::vector<EvalEpisodeRecord> episodes;
};

inline std::uint64_t eval_env_seed(const EvalSettings& s, int episode) {
  return training::derive_seed(s.seed_base, training::kStreamEvalEnv, static_cast<std::uint64_t>(episode));
}

/// Greedy (by default) evaluation of a trained pair. Parameters are read-only.
/// Ablation swaps every delivered message for the neutral one; senders still
/// compute theirs.
inline EvalReport evaluate(const PolicyNetwork& a0, const PolicyNetwork& a1, const env::GridConfig& env_cfg,
                           const EvalSettings& settings, EvalLog* log = nullptr) {
  env_cfg.validate();
  for (const PolicyNetwork* n : {&a0, &a1}) {
    if (n->config().observation_size != env_cfg.observation_size()) {
      throw ConfigError("network expects observations of size " + std::to_string(n->config().observation_size) +
                        " but the environment produces " + std::to_string(env_cfg.observation_size()));
    }
  }
  if (a0.config().architecture != a1.config().architecture) throw ConfigError("agents use different architectures");
  training::RolloutOptions ro;
  ro.action_mode = settings.action_mode;
  ro.message_mode = settings.message_selection;
  ro.ablate_messages = settings.message_mode == MessageMode::ablated;
  std::vector<EpisodeOutcome> outcomes;
  outcomes.reserve(settings.episodes);
  for (int ep = 0; ep < settings.episodes; ++ep) {
    std::mt19937_64 rng(training::derive_seed(settings.seed_base, training::kStreamEvalPolicy, ep));
    int t = 0;
    training::StepObserver observer;
    const bool record = log != nullptr && ep < log->max_episodes;
    if (record) {
      observer = [&](const env::EnvState&, const std::array<agents::ActOutput, 2>& out,
                     const std::array<agents::Message, 2>& received, const env::StepResult& res) {
        for (int a = 0; a < 2; ++a) {
          log->steps.push_back(EvalStepRecord{ep, t, a, received[a].tokens, out[a].action, out[a].message_out.tokens, res.reward});
        }
        ++t;
      };
    }
    const auto ep_log = training::rollout(env_cfg, eval_env_seed(settings, ep), a0, a1, ro, rng, observer);
    outcomes.push_back({ep_log.terminated, ep_log.length(), ep_log.optimal_steps});
    if (record) {
      log->episodes.push_back({ep, ep_log.initial, ep_log.length(), ep_log.terminated, ep_log.optimal_steps});
    }
  }
  return summarize(outcomes);
}

/// Maps the current state to both agents' actions; may look at everything.
using ScriptedPolicy = std::function<std::array<env::Action, 2>(const env::EnvState&)>;

inline EvalReport evaluate_scripted(const env::GridConfig& env_cfg, const EvalSettings& settings,
                                    const ScriptedPolicy& policy) {
  std::vector<EpisodeOutcome> outcomes;
  outcomes.reserve(settings.episodes);
  for (int ep = 0; ep < settings.episodes; ++ep) {
    auto rs = env::reset(env_cfg, eval_env_seed(settings, ep));
    EpisodeOutcome o;
    o.optimal_steps = env::optimal_assignment_steps(rs.state);
    env::EnvState s = rs.state;
    while (true) {
      const auto r = env::step(s, policy(s));
      ++o.length;
      if (r.terminated || r.truncated) {
        o.terminated = r.terminated;
        break;
      }
    }
    outcomes.push_back(o);
  }
  return summarize(outcomes);
}

/// Walks each agent straight to its goal in the optimal assignment of the
/// current state (columns first), staying once there.
inline std::array<env::Action, 2> oracle_assignment_policy(const env::EnvState& s) {
  const auto costs = env::assignment_costs(s);
  const std::array<int, 2> target = costs[1] < costs[0] ? std::array<int, 2>{1, 0} : std::array<int, 2>{0, 1};
  std::array<env::Action, 2> act{};
  for (int a = 0; a < 2; ++a) {
    const env::Cell me = s.agents[a], g = s.goals[target[a]];
    if (g.col > me.col) act[a] = env::Action::right;
    else if (g.col < me.col) act[a] = env::Action::left;
    else if (g.row > me.row) act[a] = env::Action::down;
    else if (g.row < me.row) act[a] = env::Action::up;
    else act[a] = env::Action::stay;
  }
  return act;
}

/// Column order of the action tables: Stay, Left, Right, Up, Down.
inline constexpr std::array<env::Action, 5> kTableActionOrder{env::Action::stay, env::Action::left, env::Action::right,
                                                               env::Action::up, env::Action::down};

/// Empirical P(action | received message) for one agent.
struct ConditionalTable {
  int agent = 0;
  int message_values = 0;  // rows: joint token value sum_b tok_b * R^b
  std::vector<std::array<long, 5>> counts;  // indexed by Action value
  std::vector<long> row_totals;

  bool observed(int row) const { return row_totals.at(row) > 0; }
  double probability(int row, env::Action a) const {
    if (!observed(row)) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(counts[row][static_cast<int>(a)]) / static_cast<double>(row_totals[row]);
  }
  long total() const {
    long s = 0;
    for (long v : row_totals) s += v;
    return s;
  }
};

inline int joint_token(std::span<const int> tokens, int range) {
  int v = 0, mul = 1;
  for (int t : tokens) {
    if (t < 0 || t >= range) throw DomainError("token " + std::to_string(t) + " out of range");
    v += t * mul;
    mul *= range;
  }
  return v;
}

inline ConditionalTable conditional_table(std::span<const EvalStepRecord> logs, int agent, int message_range,
                                          int message_count) {
  ConditionalTable t;
  t.agent = agent;
  t.message_values = 1;
  for (int b = 0; b < message_count; ++b) t.message_values *= message_range;
  t.counts.assign(t.message_values, std::array<long, 5>{});
  t.row_totals.assign(t.message_values, 0);
  for (const auto& r : logs) {
    if (r.agent != agent) continue;
    if (static_cast<int>(r.received.size()) != message_count) throw ShapeError("logged message has the wrong token count");
    const int row = joint_token(r.received, message_range);
    ++t.counts[row][r.action];
    ++t.row_totals[row];
  }
  return t;
}

enum class Convergence { converged, not_converged };

/// Direct-success rate over the last `window` episodes of a metrics stream.
inline double trailing_direct_rate(std::span<const training::EpisodeMetrics> metrics, int window) {
  if (window <= 0) throw ConfigError("convergence window must be positive");
  if (static_cast<int>(metrics.size()) < window) {
    throw UsageError("metrics stream of " + std::to_string(metrics.size()) + " episodes is shorter than the window " +
                     std::to_string(window));
  }
  long hits = 0;
  for (std::size_t i = metrics.size() - window; i < metrics.size(); ++i) hits += metrics[i].direct_success ? 1 : 0;
  return static_cast<double>(hits) / window;
}

/// Converged iff the trailing `window` episodes reach a direct-success rate of
/// at least `threshold`.
inline Convergence convergence_check(std::span<const training::EpisodeMetrics> metrics, int window = 1000,
                                     double threshold = 0.8) {
  return trailing_direct_rate(metrics, window) >= threshold ? Convergence::converged : Convergence::not_converged;
}

struct SweepCell {
  int range = 2;
  int count = 1;
};

/// The message-capacity grid (range, count).
inline const std::vector<SweepCell>& default_capacity_grid() {
  static const std::vector<SweepCell> grid{{2, 1}, {2, 2}, {2, 4}, {5, 1}, {5, 2}, {10, 1}};
  return grid;
}

struct SweepRow {
  SweepCell cell;
  int seeds = 0;
  int converged = 0;
  std::vector<double> trailing_rates;  // per seed
  std::string error;

  double converged_fraction() const { return seeds > 0 ? static_cast<double>(converged) / seeds : 0.0; }
};

/// Trains LDC agents for every (range, count) cell and seed and checks
/// convergence. A failing cell records its error and the sweep continues.
inline std::vector<SweepRow> capacity_sweep(const env::GridConfig& env_cfg, const agents::AgentConfig& base,
                                            const training::TrainConfig& train_cfg, std::span<const SweepCell> cells,
                                            std::span<const std::uint64_t> seeds, int window, double threshold) {
  std::vector<SweepRow> rows;
  for (const auto& cell : cells) {
    SweepRow row;
    row.cell = cell;
    try {
      agents::AgentConfig cfg = base;
      cfg.architecture = agents::Architecture::ldc;
      cfg.message_range = cell.range;
      cfg.message_count = cell.count;
      for (std::uint64_t seed : seeds) {
        training::TrainConfig tc = train_cfg;
        tc.seed = seed;
        training::AgentPair pair(cfg, seed);
        const auto metrics = training::train(tc, env_cfg, pair);
        const int w = std::min<int>(window, static_cast<int>(metrics.size()));
        row.trailing_rates.push_back(trailing_direct_rate(metrics, w));
        ++row.seeds;
        if (convergence_check(metrics, w, threshold) == Convergence::converged) ++row.converged;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace marl::analysis
