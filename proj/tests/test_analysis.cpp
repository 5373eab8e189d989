#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "marl/analysis.hpp"
#include "support/agent_checks.hpp"

using namespace marl;
using namespace marl::analysis;
using agents::Architecture;
using marl::testing::small_agent;

namespace {

env::GridConfig fo_grid() {
  env::GridConfig g;
  g.size = 6;
  g.legacy_layout = true;
  return g;
}

EvalSettings settings(int episodes) {
  EvalSettings s;
  s.episodes = episodes;
  return s;
}

std::vector<double> flat_values(const agents::PolicyNetwork& net) {
  std::vector<double> out;
  for (const auto& p : net.params().params()) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

EvalStepRecord step(int agent, int token, env::Action a) {
  EvalStepRecord r;
  r.agent = agent;
  r.received = {token};
  r.action = static_cast<int>(a);
  return r;
}

std::vector<training::EpisodeMetrics> stream(const std::vector<bool>& direct) {
  std::vector<training::EpisodeMetrics> m(direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    m[i].episode = static_cast<long>(i);
    m[i].direct_success = direct[i];
  }
  return m;
}

}  // namespace

TEST(Wilson, ContainsEstimateAndStaysInUnitInterval) {
  for (long k : {0L, 1L, 50L, 99L, 100L}) {
    const auto ci = wilson_interval(k, 100);
    EXPECT_GE(ci.low, 0.0);
    EXPECT_LE(ci.high, 1.0);
    EXPECT_LE(ci.low, k / 100.0 + 1e-12);
    EXPECT_GE(ci.high, k / 100.0 - 1e-12);
  }
}

TEST(Wilson, HalfWidthShrinksAsInverseSqrt) {
  const auto a = wilson_interval(900, 1000);
  const auto b = wilson_interval(9000, 10000);
  const double ratio = (a.high - a.low) / (b.high - b.low);
  EXPECT_NEAR(ratio, std::sqrt(10.0), 0.05);
  EXPECT_LT((b.high - b.low) / 2, 0.01);
}

TEST(Summarize, RatesAndAverages) {
  std::vector<EpisodeOutcome> o{{true, 3, 3}, {true, 5, 3}, {false, 200, 2}, {true, 1, 1}};
  const auto r = summarize(o);
  EXPECT_EQ(r.episodes, 4);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.75);
  EXPECT_DOUBLE_EQ(r.direct_success_rate, 0.5);
  EXPECT_DOUBLE_EQ(r.avg_steps, 2.0);
  EXPECT_DOUBLE_EQ(r.avg_success_steps, 3.0);
  EXPECT_LE(r.direct_success_rate, r.success_rate);
}

TEST(Summarize, NoDirectSuccessLeavesAverageUndefined) {
  std::vector<EpisodeOutcome> o{{false, 200, 2}};
  EXPECT_TRUE(std::isnan(summarize(o).avg_steps));
}

TEST(Evaluate, OraclePolicyIsAlwaysDirect) {
  for (bool legacy : {true, false}) {
    env::GridConfig g = fo_grid();
    g.legacy_layout = legacy;
    const auto r = evaluate_scripted(g, settings(2000), oracle_assignment_policy);
    EXPECT_DOUBLE_EQ(r.direct_success_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
    EXPECT_GE(r.avg_steps, 1.0);
  }
}

TEST(Evaluate, BaselineAblatedEqualsLive) {
  const auto cfg = small_agent(Architecture::baseline, true);
  agents::PolicyNetwork a(cfg, 3), b(cfg, 4);
  auto s = settings(300);
  EvalLog live_log, abl_log;
  const auto live = evaluate(a, b, fo_grid(), s, &live_log);
  s.message_mode = MessageMode::ablated;
  const auto abl = evaluate(a, b, fo_grid(), s, &abl_log);
  EXPECT_EQ(live.successes, abl.successes);
  EXPECT_EQ(live.direct_successes, abl.direct_successes);
  ASSERT_EQ(live_log.steps.size(), abl_log.steps.size());
  for (std::size_t i = 0; i < live_log.steps.size(); ++i) EXPECT_EQ(live_log.steps[i].action, abl_log.steps[i].action);
}

TEST(Evaluate, ParametersBitIdenticalAfterEvaluation) {
  for (auto arch : {Architecture::baseline, Architecture::ldc, Architecture::intention}) {
    const auto cfg = small_agent(arch, true);
    agents::PolicyNetwork a(cfg, 5), b(cfg, 6);
    const auto before_a = flat_values(a), before_b = flat_values(b);
    evaluate(a, b, fo_grid(), settings(50));
    EXPECT_EQ(flat_values(a), before_a);
    EXPECT_EQ(flat_values(b), before_b);
  }
}

TEST(Evaluate, SameSeedSameReport) {
  const auto cfg = small_agent(Architecture::ldc, true);
  agents::PolicyNetwork a(cfg, 7), b(cfg, 8);
  auto s = settings(200);
  s.action_mode = ActMode::sample;
  const auto r1 = evaluate(a, b, fo_grid(), s);
  const auto r2 = evaluate(a, b, fo_grid(), s);
  EXPECT_EQ(r1.successes, r2.successes);
  EXPECT_EQ(r1.direct_successes, r2.direct_successes);
  EXPECT_EQ(r1.avg_success_steps, r2.avg_success_steps);
}

TEST(Evaluate, ArchitectureMismatchIsConfigError) {
  agents::PolicyNetwork a(small_agent(Architecture::ldc, true), 1);
  agents::PolicyNetwork b(small_agent(Architecture::baseline, true), 2);
  EXPECT_THROW(evaluate(a, b, fo_grid(), settings(1)), ConfigError);
  agents::PolicyNetwork po(small_agent(Architecture::ldc, false), 3);
  EXPECT_THROW(evaluate(po, po, fo_grid(), settings(1)), ConfigError);
}

TEST(Evaluate, LogRespectsEpisodeLimit) {
  const auto cfg = small_agent(Architecture::ldc, true);
  agents::PolicyNetwork a(cfg, 9), b(cfg, 10);
  EvalLog log;
  log.max_episodes = 5;
  evaluate(a, b, fo_grid(), settings(20), &log);
  ASSERT_EQ(log.episodes.size(), 5u);
  long steps = 0;
  for (const auto& e : log.episodes) steps += 2L * e.length;
  EXPECT_EQ(static_cast<long>(log.steps.size()), steps);
}

TEST(ConditionalTable, CountingExample) {
  std::vector<EvalStepRecord> logs{step(0, 0, env::Action::up), step(0, 0, env::Action::up),
                                   step(0, 0, env::Action::down), step(0, 1, env::Action::stay),
                                   step(1, 1, env::Action::left)};
  const auto t = conditional_table(logs, 0, 2, 1);
  EXPECT_NEAR(t.probability(0, env::Action::up), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(t.probability(0, env::Action::down), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(t.probability(1, env::Action::stay), 1.0);
  EXPECT_EQ(t.total(), 4);
  EXPECT_EQ(t.counts[0][static_cast<int>(env::Action::up)], 2);
}

TEST(ConditionalTable, UnseenMessageRowHasZeroCount) {
  std::vector<EvalStepRecord> logs{step(0, 0, env::Action::up)};
  const auto t = conditional_table(logs, 0, 2, 1);
  EXPECT_FALSE(t.observed(1));
  EXPECT_EQ(t.row_totals[1], 0);
  EXPECT_TRUE(std::isnan(t.probability(1, env::Action::up)));
}

TEST(ConditionalTable, UniformRandomRowsWithinFourSigma) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> tok(0, 1), act(0, 4);
  std::vector<EvalStepRecord> logs;
  for (int i = 0; i < 50000; ++i) logs.push_back(step(0, tok(rng), static_cast<env::Action>(act(rng))));
  const auto t = conditional_table(logs, 0, 2, 1);
  for (int row = 0; row < 2; ++row) {
    const double n = static_cast<double>(t.row_totals[row]);
    const double sigma = std::sqrt(0.2 * 0.8 / n);
    double sum = 0;
    for (auto a : kTableActionOrder) {
      EXPECT_NEAR(t.probability(row, a), 0.2, 4 * sigma);
      sum += t.probability(row, a);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(ConditionalTable, LayoutIsTwoRowsByFiveActions) {
  const auto cfg = small_agent(Architecture::ldc, true);
  agents::PolicyNetwork a(cfg, 11), b(cfg, 12);
  EvalLog log;
  evaluate(a, b, fo_grid(), settings(100), &log);
  long both = 0;
  for (int agent = 0; agent < 2; ++agent) {
    const auto t = conditional_table(log.steps, agent, cfg.message_range, cfg.message_count);
    EXPECT_EQ(t.message_values, 2);
    ASSERT_EQ(t.counts.size(), 2u);
    EXPECT_EQ(t.counts[0].size(), 5u);
    for (int row = 0; row < 2; ++row) {
      if (!t.observed(row)) continue;
      double sum = 0;
      for (auto act : kTableActionOrder) sum += t.probability(row, act);
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
    both += t.total();
  }
  EXPECT_EQ(both, static_cast<long>(log.steps.size()));
}

TEST(ConditionalTable, JointTokenIndexing) {
  const std::vector<int> tokens{1, 0, 1};
  EXPECT_EQ(joint_token(tokens, 2), 5);
  const std::vector<int> bad{2};
  EXPECT_THROW(joint_token(bad, 2), DomainError);
}

TEST(Convergence, Examples) {
  EXPECT_EQ(convergence_check(stream(std::vector<bool>(1000, true))), Convergence::converged);
  EXPECT_EQ(convergence_check(stream(std::vector<bool>(1000, false))), Convergence::not_converged);
  std::vector<bool> alt(1000);
  for (int i = 0; i < 1000; ++i) alt[i] = i % 2 == 0;
  EXPECT_EQ(convergence_check(stream(alt)), Convergence::not_converged);
  EXPECT_EQ(convergence_check(stream(alt), 1000, 0.5), Convergence::converged);
}

TEST(Convergence, OnlyTrailingWindowCounts) {
  std::vector<bool> d(2000, false);
  for (int i = 1000; i < 2000; ++i) d[i] = true;
  EXPECT_EQ(convergence_check(stream(d)), Convergence::converged);
  EXPECT_DOUBLE_EQ(trailing_direct_rate(stream(d), 2000), 0.5);
}

TEST(Convergence, ShortStreamIsRejected) {
  EXPECT_THROW(convergence_check(stream(std::vector<bool>(10, true))), UsageError);
}

TEST(Sweep, EmitsOneRowPerCellAndIsDeterministic) {
  agents::AgentConfig base = small_agent(Architecture::ldc, true);
  training::TrainConfig tc;
  tc.episodes = 3;
  const std::vector<std::uint64_t> seeds{0};
  const auto rows = capacity_sweep(fo_grid(), base, tc, default_capacity_grid(), seeds, 1000, 0.8);
  ASSERT_EQ(rows.size(), 6u);
  const std::vector<std::pair<int, int>> expected{{2, 1}, {2, 2}, {2, 4}, {5, 1}, {5, 2}, {10, 1}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].cell.range, expected[i].first);
    EXPECT_EQ(rows[i].cell.count, expected[i].second);
    EXPECT_TRUE(rows[i].error.empty()) << rows[i].error;
    EXPECT_EQ(rows[i].seeds, 1);
  }
  const auto again = capacity_sweep(fo_grid(), base, tc, default_capacity_grid(), seeds, 1000, 0.8);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].trailing_rates, again[i].trailing_rates);
}

TEST(Sweep, FailingCellDoesNotAbortSweep) {
  agents::AgentConfig base = small_agent(Architecture::ldc, true);
  training::TrainConfig tc;
  tc.episodes = 2;
  const std::vector<SweepCell> cells{{2, 1}, {0, 1}, {2, 2}};
  const std::vector<std::uint64_t> seeds{0};
  const auto rows = capacity_sweep(fo_grid(), base, tc, cells, seeds, 1000, 0.8);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_TRUE(rows[2].error.empty());
}
