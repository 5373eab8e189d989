#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/analysis.hpp"
#include "marl/errors.hpp"
#include "marl/log.hpp"
#include "marl/runner/checkpoint.hpp"
#include "marl/runner/config.hpp"
#include "marl/runner/presets.hpp"
#include "marl/runner/records.hpp"
#include "marl/training.hpp"

namespace marl::runner {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitCollapse = 4;

/// `base` if it does not exist yet, otherwise base-1, base-2, ...
inline fs::path unique_dir(const fs::path& base) {
  fs::path p = base;
  for (int k = 1; fs::exists(p); ++k) p = base.string() + "-" + std::to_string(k);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
  return p;
}

inline void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Evaluation artifacts

inline json eval_report_json(const analysis::EvalReport& r) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return json{{"episodes", r.episodes},
              {"successes", r.successes},
              {"direct_successes", r.direct_successes},
              {"success_rate", r.success_rate},
              {"direct_success_rate", r.direct_success_rate},
              {"avg_steps", num(r.avg_steps)},
              {"avg_success_steps", num(r.avg_success_steps)},
              {"success_ci", {r.success_ci.low, r.success_ci.high}},
              {"direct_ci", {r.direct_ci.low, r.direct_ci.high}}};
}

inline const char* kEvalCsvHeader =
    "condition,episodes,success_rate,success_ci_low,success_ci_high,direct_success_rate,direct_ci_low,direct_ci_high,"
    "avg_steps,avg_success_steps";

inline std::string eval_csv_row(const std::string& condition, const analysis::EvalReport& r) {
  auto num = [](double v) { return std::isnan(v) ? std::string("n/a") : fmt_double(v); };
  return condition + "," + std::to_string(r.episodes) + "," + fmt_double(r.success_rate) + "," + fmt_double(r.success_ci.low) +
         "," + fmt_double(r.success_ci.high) + "," + fmt_double(r.direct_success_rate) + "," +
         fmt_double(r.direct_ci.low) + "," + fmt_double(r.direct_ci.high) + "," + num(r.avg_steps) + "," +
         num(r.avg_success_steps);
}

inline std::string eval_text(const std::string& condition, const analysis::EvalReport& r) {
  return condition + ": " + std::to_string(r.episodes) + " episodes, success " + fmt_fixed(100 * r.success_rate, 2) +
         "% [" + fmt_fixed(100 * r.success_ci.low, 2) + ", " + fmt_fixed(100 * r.success_ci.high, 2) + "], direct " +
         fmt_fixed(100 * r.direct_success_rate, 2) + "% [" + fmt_fixed(100 * r.direct_ci.low, 2) + ", " +
         fmt_fixed(100 * r.direct_ci.high, 2) + "], avg steps (direct) " + fmt_fixed(r.avg_steps, 3) + "\n";
}

inline json cells_json(const std::array<env::Cell, 2>& cells) {
  return json::array({json::array({cells[0].col, cells[0].row}), json::array({cells[1].col, cells[1].row})});
}

/// JSONL: one "episode" row per logged episode followed by its "step" rows.
inline std::string eval_log_jsonl(const analysis::EvalLog& log) {
  std::string out;
  std::size_t s = 0;
  for (const auto& e : log.episodes) {
    out += json{{"type", "episode"},
                {"episode", e.episode},
                {"agents", cells_json(e.initial.agents)},
                {"goals", cells_json(e.initial.goals)},
                {"goal_perm", e.initial.goal_perm},
                {"length", e.length},
                {"terminated", e.terminated},
                {"optimal_steps", e.optimal_steps}}
               .dump();
    out += '\n';
    for (; s < log.steps.size() && log.steps[s].episode == e.episode; ++s) {
      const auto& r = log.steps[s];
      out += json{{"type", "step"},   {"episode", r.episode}, {"t", r.t},      {"agent", r.agent},
                  {"received", r.received}, {"action", r.action}, {"sent", r.sent}, {"reward", r.reward}}
                 .dump();
      out += '\n';
    }
  }
  return out;
}

inline std::string conditional_tables_csv(std::span<const analysis::ConditionalTable> tables) {
  std::string s = "agent,message,count";
  for (auto a : analysis::kTableActionOrder) s += std::string(",") + env::action_name(a);
  for (auto a : analysis::kTableActionOrder) s += std::string(",count_") + env::action_name(a);
  s += "\n";
  for (const auto& t : tables) {
    for (int row = 0; row < t.message_values; ++row) {
      s += std::to_string(t.agent + 1) + "," + std::to_string(row) + "," + std::to_string(t.row_totals[row]);
      for (auto a : analysis::kTableActionOrder) s += "," + (t.observed(row) ? fmt_double(t.probability(row, a)) : "n/a");
      for (auto a : analysis::kTableActionOrder) s += "," + std::to_string(t.counts[row][static_cast<int>(a)]);
      s += "\n";
    }
  }
  return s;
}

/// Text layout: per agent, one row per observed message and the action
/// probabilities in Stay, Left, Right, Up, Down order.
inline std::string conditional_tables_text(std::span<const analysis::ConditionalTable> tables) {
  std::string s;
  for (const auto& t : tables) {
    s += "Agent " + std::to_string(t.agent + 1) + "'s action probabilities conditioned on Agent " +
         std::to_string(2 - t.agent) + "'s message\n";
    s += "Message";
    for (auto a : analysis::kTableActionOrder) s += std::string("\t") + env::action_name(a);
    s += "\tcount\n";
    for (int row = 0; row < t.message_values; ++row) {
      if (!t.observed(row)) continue;
      s += std::to_string(row);
      for (auto a : analysis::kTableActionOrder) s += "\t" + fmt_fixed(100 * t.probability(row, a), 2) + "%";
      s += "\t" + std::to_string(t.row_totals[row]) + "\n";
    }
    s += "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training runs

struct SeedResult {
  std::uint64_t seed = 0;
  fs::path dir;
  std::vector<training::EpisodeMetrics> metrics;
  bool collapsed = false;
  std::string error;
  std::optional<analysis::EvalReport> live;
  std::optional<analysis::EvalReport> ablated;
  std::vector<analysis::ConditionalTable> tables;
  fs::path checkpoint;
  /// Trailing direct-success rate over min(window, episodes) training episodes.
  double trailing_rate = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;

  bool trained() const { return !metrics.empty(); }
};

struct ExperimentResult {
  fs::path dir;
  ExperimentConfig config;
  std::vector<SeedResult> seeds;

  bool all_collapsed() const {
    if (seeds.empty()) return false;
    return std::all_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return s.collapsed; });
  }
};

inline analysis::EvalSettings eval_settings(const ExperimentConfig& cfg, analysis::MessageMode mode) {
  analysis::EvalSettings s;
  s.episodes = cfg.eval.episodes;
  s.seed_base = cfg.eval.seed_base;
  s.action_mode = cfg.eval.action_mode;
  s.message_mode = mode;
  return s;
}

inline long skipped_updates(std::span<const training::EpisodeMetrics> metrics) {
  long n = 0;
  for (const auto& m : metrics) {
    for (const auto& l : m.loss) n += l.skipped ? 1 : 0;
  }
  return n;
}

/// Trains, checkpoints and evaluates one seed inside `dir`.
inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  SeedResult res;
  res.seed = seed;
  res.dir = dir;
  make_dir(dir);
  const auto acfg = cfg.resolved_agent();
  training::TrainConfig tc = cfg.train;
  tc.seed = seed;
  tensor::OptimizerConfig ocfg;
  ocfg.kind = tc.optimizer;
  training::AgentPair pair(acfg, seed, ocfg);

  MetricsWriter metrics_out(dir / "metrics.csv");
  RunRecord record(dir / "run.jsonl");
  CheckpointMeta meta{cfg, seed, 0};
  auto save = [&](const fs::path& file, long completed) {
    meta.episode = completed;
    checkpoint_save(file, meta, pair.nets[0], pair.nets[1]);
    record.checkpoint(file, completed);
  };

  training::TrainHooks hooks;
  hooks.on_episode = [&](const training::EpisodeMetrics& m) {
    metrics_out.write(m);
    record.episode(episode_payload(m));
    if ((m.episode + 1) % 1000 == 0) {
      log::debug("seed " + std::to_string(seed) + " episode " + std::to_string(m.episode + 1) + " return " +
                 fmt_fixed(m.total_return, 3));
    }
  };
  if (cfg.checkpoint_every > 0) {
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](long completed) {
      save(dir / ("checkpoint_" + std::to_string(completed) + ".json"), completed);
    };
  }

  try {
    if (tc.episodes > 0) res.metrics = training::train(tc, cfg.env, pair, hooks);
    const long skipped = skipped_updates(res.metrics);
    if (!res.metrics.empty() && skipped > static_cast<long>(res.metrics.size())) {
      res.collapsed = true;
      res.error = "more than half of all updates were skipped for non-finite values";
    }
  } catch (const NumericError& e) {
    res.collapsed = true;
    res.error = e.what();
  }
  metrics_out.flush();

  res.checkpoint = dir / "checkpoint_final.json";
  save(res.checkpoint, static_cast<long>(res.metrics.size()));

  if (!res.metrics.empty()) {
    const int w = std::min<int>(cfg.eval.convergence_window, static_cast<int>(res.metrics.size()));
    res.trailing_rate = analysis::trailing_direct_rate(res.metrics, w);
    res.converged = analysis::convergence_check(res.metrics, w, cfg.eval.convergence_threshold) ==
                    analysis::Convergence::converged;
  }

  if (res.collapsed) {
    log::error("seed " + std::to_string(seed) + " collapsed: " + res.error);
    record.eval(json{{"seed", seed}, {"collapsed", true}, {"error", res.error}});
  } else if (res.trained() && cfg.eval.episodes > 0) {
    std::string csv = std::string(kEvalCsvHeader) + "\n", text;
    try {
      analysis::EvalLog elog;
      elog.max_episodes = cfg.eval.log_episodes;
      res.live = analysis::evaluate(pair.nets[0], pair.nets[1], cfg.env,
                                    eval_settings(cfg, analysis::MessageMode::live), &elog);
      csv += eval_csv_row("live", *res.live) + "\n";
      text += eval_text("live", *res.live);
      record.eval(json{{"condition", "live"}, {"report", eval_report_json(*res.live)}});
      write_text(dir / "eval_live.jsonl", eval_log_jsonl(elog));
      if (acfg.architecture == agents::Architecture::ldc) {
        for (int a = 0; a < 2; ++a) {
          res.tables.push_back(analysis::conditional_table(elog.steps, a, acfg.message_range, acfg.message_count));
        }
        write_text(dir / "conditional_tables.csv", conditional_tables_csv(res.tables));
        write_text(dir / "conditional_tables.txt", conditional_tables_text(res.tables));
      }
      if (cfg.eval.ablation) {
        res.ablated = analysis::evaluate(pair.nets[0], pair.nets[1], cfg.env,
                                         eval_settings(cfg, analysis::MessageMode::ablated));
        csv += eval_csv_row("ablated", *res.ablated) + "\n";
        text += eval_text("ablated", *res.ablated);
        record.eval(json{{"condition", "ablated"}, {"report", eval_report_json(*res.ablated)}});
      }
    } catch (const NumericError& e) {
      res.collapsed = true;
      res.error = std::string("evaluation: ") + e.what();
      res.live.reset();
      res.ablated.reset();
    }
    write_text(dir / "eval.csv", csv);
    write_text(dir / "eval.txt", text);
  }
  if (cfg.svg && res.trained()) {
    write_text(dir / "curves.svg", learning_curves_svg(cfg.name + " seed " + std::to_string(seed), res.metrics));
  }
  record.flush();
  return res;
}

inline std::string summary_csv(const ExperimentResult& r) {
  std::string s =
      "seed,episodes,collapsed,trailing_direct_rate,converged,live_success,live_direct,live_avg_steps,ablated_success,"
      "ablated_direct,ablated_avg_steps\n";
  auto opt = [](const std::optional<analysis::EvalReport>& rep, int which) -> std::string {
    if (!rep) return "n/a";
    const double v = which == 0 ? rep->success_rate : which == 1 ? rep->direct_success_rate : rep->avg_steps;
    return std::isnan(v) ? "n/a" : fmt_double(v);
  };
  for (const auto& sr : r.seeds) {
    s += std::to_string(sr.seed) + "," + std::to_string(sr.metrics.size()) + "," + (sr.collapsed ? "1" : "0") + "," +
         (sr.trained() ? fmt_double(sr.trailing_rate) : "n/a") + "," + (sr.converged ? "1" : "0") + "," +
         opt(sr.live, 0) + "," + opt(sr.live, 1) + "," + opt(sr.live, 2) + "," + opt(sr.ablated, 0) + "," +
         opt(sr.ablated, 1) + "," + opt(sr.ablated, 2) + "\n";
  }
  return s;
}

/// Runs every seed of `cfg` into a fresh directory under `out_root`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_root) {
  cfg.validate();
  ExperimentResult r;
  r.config = cfg;
  r.dir = unique_dir(out_root / cfg.name);
  write_text(r.dir / "config.json", to_json(cfg).dump(2) + "\n");
  for (std::uint64_t seed : cfg.seeds) {
    log::info(cfg.name + ": seed " + std::to_string(seed) + ", " + std::to_string(cfg.train.episodes) + " episodes");
    r.seeds.push_back(run_seed(cfg, seed, r.dir / ("seed_" + std::to_string(seed))));
    const auto& sr = r.seeds.back();
    if (sr.live) log::info(cfg.name + ": seed " + std::to_string(seed) + " " + eval_text("live", *sr.live));
  }
  write_text(r.dir / "summary.csv", summary_csv(r));
  return r;
}

// ---------------------------------------------------------------------------
// Table reproduction

struct RowResult {
  std::string label;
  std::string training;
  analysis::MessageMode messages = analysis::MessageMode::live;
  json paper;
  /// One report per non-collapsed, evaluated seed.
  std::vector<analysis::EvalReport> reports;
  std::vector<std::uint64_t> seeds;
  int converged = 0;
  int trained_seeds = 0;
};

struct ReproduceResult {
  std::string id;
  fs::path dir;
  std::vector<std::string> measures;
  std::vector<RowResult> rows;
  std::map<std::string, ExperimentResult> trainings;
};

inline double measure_value(const analysis::EvalReport& r, const std::string& measure) {
  if (measure == "success_rate") return r.success_rate;
  if (measure == "direct_success_rate") return r.direct_success_rate;
  if (measure == "avg_steps") return r.avg_steps;
  throw ConfigError("unknown measure '" + measure + "'");
}

/// Mean over seeds of a measure; NaN when no seed has a defined value.
inline double row_mean(const RowResult& row, const std::string& measure) {
  if (measure == "converged") return row.trained_seeds > 0 ? static_cast<double>(row.converged) / row.trained_seeds : NAN;
  double s = 0;
  int n = 0;
  for (const auto& r : row.reports) {
    const double v = measure_value(r, measure);
    if (std::isnan(v)) continue;
    s += v;
    ++n;
  }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

/// Index of the seed with the highest direct-success rate, or -1.
inline int best_seed_index(const RowResult& row) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(row.reports.size()); ++i) {
    if (best < 0 || row.reports[i].direct_success_rate > row.reports[best].direct_success_rate) best = i;
  }
  return best;
}

/// Pooled Wilson interval over all seeds' episodes for a rate measure.
inline analysis::Interval pooled_interval(const RowResult& row, const std::string& measure) {
  long k = 0, n = 0;
  for (const auto& r : row.reports) {
    k += measure == "success_rate" ? r.successes : r.direct_successes;
    n += r.episodes;
  }
  return analysis::wilson_interval(k, n);
}

inline std::string paper_cell(const json& paper, const std::string& measure) {
  if (!paper.contains(measure)) return "-";
  const auto& v = paper[measure];
  if (v.is_string()) return v.get<std::string>();
  if (measure == "avg_steps") return fmt_fixed(v.get<double>(), 2);
  return fmt_fixed(100 * v.get<double>(), 2) + "%";
}

inline std::string measured_cell(const RowResult& row, const std::string& measure) {
  if (measure == "converged") {
    if (row.trained_seeds == 0) return "n/a";
    return std::string(2 * row.converged > row.trained_seeds ? "Yes" : "No") + " (" + std::to_string(row.converged) +
           "/" + std::to_string(row.trained_seeds) + ")";
  }
  const double v = row_mean(row, measure);
  if (std::isnan(v)) return "n/a";
  if (measure == "avg_steps") return fmt_fixed(v, 2);
  return fmt_fixed(100 * v, 2) + "%";
}

inline std::string reproduce_csv(const ReproduceResult& r) {
  std::string s = "table,row,measure,paper,measured_mean,measured_best_seed,ci_low,ci_high,seeds\n";
  for (const auto& row : r.rows) {
    for (const auto& m : r.measures) {
      std::string paper = "n/a";
      if (row.paper.contains(m)) paper = row.paper[m].is_string() ? row.paper[m].get<std::string>() : fmt_double(row.paper[m].get<double>());
      const double mean = row_mean(row, m);
      std::string best = "n/a", lo = "n/a", hi = "n/a";
      if (m != "converged" && !row.reports.empty()) {
        const double b = measure_value(row.reports[best_seed_index(row)], m);
        if (!std::isnan(b)) best = fmt_double(b);
        if (m != "avg_steps") {
          const auto ci = pooled_interval(row, m);
          lo = fmt_double(ci.low);
          hi = fmt_double(ci.high);
        }
      }
      const int n = m == "converged" ? row.trained_seeds : static_cast<int>(row.reports.size());
      s += r.id + ",\"" + row.label + "\"," + m + "," + paper + "," + (std::isnan(mean) ? "n/a" : fmt_double(mean)) + "," +
           best + "," + lo + "," + hi + "," + std::to_string(n) + "\n";
    }
  }
  return s;
}

inline std::string reproduce_text(const ReproduceResult& r, const std::string& title) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Condition"};
  for (const auto& m : r.measures) {
    header.push_back(m + " (paper)");
    header.push_back(m + " (measured)");
  }
  cells.push_back(header);
  for (const auto& row : r.rows) {
    std::vector<std::string> line{row.label};
    for (const auto& m : r.measures) {
      line.push_back(paper_cell(row.paper, m));
      line.push_back(measured_cell(row, m));
    }
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::string s = r.id + ": " + title + "\n";
  for (std::size_t li = 0; li < cells.size(); ++li) {
    for (std::size_t i = 0; i < cells[li].size(); ++i) {
      s += cells[li][i] + std::string(width[i] - cells[li][i].size() + 2, ' ');
    }
    s += "\n";
    if (li == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      s += std::string(total, '-') + "\n";
    }
  }
  s += "measured = mean over seeds; rates are direct success unless named otherwise\n";
  return s;
}

/// Experiment config of one preset training under a budget: base, then the
/// budget overrides, then the training overrides.
inline ExperimentConfig preset_config(const std::string& id, const std::string& budget, const std::string& training) {
  const json& p = preset(id);
  if (!p.at("budgets").contains(budget)) throw ConfigError("preset " + id + " has no budget '" + budget + "'");
  if (!p.at("trainings").contains(training)) throw ConfigError("preset " + id + " has no training '" + training + "'");
  ExperimentConfig cfg;
  apply_json(cfg, p.at("base"));
  apply_json(cfg, p.at("budgets").at(budget));
  apply_json(cfg, p.at("trainings").at(training));
  cfg.name = training;
  for (char& c : cfg.name) {
    if (c == ' ') c = '_';
  }
  cfg.svg = true;
  cfg.validate();
  return cfg;
}

/// Runs the preset's trainings under the chosen budget. `only` restricts the
/// run to rows naming one of the listed trainings (empty = all).
inline ReproduceResult reproduce(const std::string& id, const std::string& budget, const fs::path& out_root,
                                 const std::vector<std::string>& only = {}) {
  const json& p = preset(id);
  if (!p.at("budgets").contains(budget)) throw ConfigError("preset " + id + " has no budget '" + budget + "'");
  ReproduceResult r;
  r.id = id;
  r.measures = p.at("measures").get<std::vector<std::string>>();
  r.dir = unique_dir(out_root / (id + "-" + budget));

  std::vector<std::string> wanted;
  for (const auto& row : p.at("rows")) {
    const auto t = row.at("training").get<std::string>();
    const bool selected = only.empty() || std::find(only.begin(), only.end(), t) != only.end();
    if (selected && std::find(wanted.begin(), wanted.end(), t) == wanted.end()) wanted.push_back(t);
  }
  for (const auto& t : wanted) r.trainings.emplace(t, run_experiment(preset_config(id, budget, t), r.dir));
  for (const auto& rowj : p.at("rows")) {
    const auto t = rowj.at("training").get<std::string>();
    if (!r.trainings.contains(t)) continue;
    RowResult row;
    row.label = rowj.at("label").get<std::string>();
    row.training = t;
    row.messages = rowj.at("messages").get<std::string>() == "ablated" ? analysis::MessageMode::ablated
                                                                        : analysis::MessageMode::live;
    row.paper = rowj.at("paper");
    for (const auto& sr : r.trainings.at(t).seeds) {
      if (sr.collapsed) continue;
      if (sr.trained()) {
        ++row.trained_seeds;
        row.converged += sr.converged ? 1 : 0;
      }
      const auto& rep = row.messages == analysis::MessageMode::ablated ? sr.ablated : sr.live;
      if (rep) {
        row.reports.push_back(*rep);
        row.seeds.push_back(sr.seed);
      }
    }
    r.rows.push_back(std::move(row));
  }
  write_text(r.dir / "report.csv", reproduce_csv(r));
  write_text(r.dir / "report.txt", reproduce_text(r, p.at("title").get<std::string>()));
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoint inspection

/// Evaluates a checkpoint in the environment it was trained on.
inline analysis::EvalReport evaluate_checkpoint(const Checkpoint& c, int episodes, bool ablate,
                                                std::optional<agents::Architecture> expected = std::nullopt,
                                                std::optional<std::uint64_t> seed_base = std::nullopt) {
  const auto& cfg = c.meta.config;
  require_compatible(c, expected.value_or(cfg.agent.architecture), cfg.env);
  if (episodes < 1) throw ConfigError("--episodes must be >= 1");
  auto settings = eval_settings(cfg, ablate ? analysis::MessageMode::ablated : analysis::MessageMode::live);
  settings.episodes = episodes;
  if (seed_base) settings.seed_base = *seed_base;
  const auto nets = c.networks();
  return analysis::evaluate(nets[0], nets[1], cfg.env, settings);
}

inline std::string format_tokens(const agents::Message& m) {
  std::string s;
  if (!m.tokens.empty()) {
    for (int t : m.tokens) s += (s.empty() ? "" : " ") + std::to_string(t);
    return "[" + s + "]";
  }
  if (!m.values.empty()) {
    for (double v : m.values) s += (s.empty() ? "" : " ") + fmt_fixed(v, 2);
    return "(" + s + ")";
  }
  return "-";
}

/// Text replay of `episodes` evaluation episodes.
inline std::string render_checkpoint(const Checkpoint& c, int episodes, std::uint64_t seed_base) {
  const auto& cfg = c.meta.config;
  const auto nets = c.networks();
  std::string out;
  training::RolloutOptions ro;
  ro.action_mode = cfg.eval.action_mode;
  ro.message_mode = agents::ActMode::greedy;
  for (int ep = 0; ep < episodes; ++ep) {
    analysis::EvalSettings es;
    es.seed_base = seed_base;
    std::mt19937_64 rng(training::derive_seed(seed_base, training::kStreamEvalPolicy, ep));
    int t = 0;
    env::EnvState last;
    out += "episode " + std::to_string(ep) + "\n";
    training::StepObserver obs = [&](const env::EnvState& before, const std::array<agents::ActOutput, 2>& o,
                                     const std::array<agents::Message, 2>& received, const env::StepResult& res) {
      out += "t=" + std::to_string(t) + "\n" + env::render(before);
      for (int a = 0; a < 2; ++a) {
        out += std::string("  ") + (a == 0 ? "A" : "B") + " received " + format_tokens(received[a]) + ", action " +
               env::action_name(static_cast<env::Action>(o[a].action)) + ", sends " + format_tokens(o[a].message_out) +
               "\n";
      }
      out += "  reward " + fmt_fixed(res.reward, 2) + "\n";
      last = before;
      env::step(last, {static_cast<env::Action>(o[0].action), static_cast<env::Action>(o[1].action)});
      ++t;
    };
    const auto log = training::rollout(cfg.env, analysis::eval_env_seed(es, ep), nets[0], nets[1], ro, rng, obs);
    out += "t=" + std::to_string(t) + "\n" + env::render(last);
    out += std::string("result: ") + (log.terminated ? "success" : "truncated") + " after " +
           std::to_string(log.length()) + " steps (optimal " + std::to_string(log.optimal_steps) + ")" +
           (log.direct_success() ? ", direct" : "") + "\n\n";
  }
  return out;
}

}  // namespace marl::runner
