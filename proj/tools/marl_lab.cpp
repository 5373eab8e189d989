#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "marl/errors.hpp"
#include "marl/log.hpp"
#include "marl/runner/runner.hpp"

namespace {

using namespace marl;
namespace rn = marl::runner;

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty seed list");
  return seeds;
}

int cmd_run(const std::string& config_path, const std::string& seeds, const std::string& out) {
  auto cfg = rn::load_config(config_path);
  if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
  if (!out.empty()) cfg.output_dir = out;
  const auto result = rn::run_experiment(cfg, cfg.output_dir);
  std::cout << "run directory: " << result.dir.string() << "\n";
  for (const auto& s : result.seeds) {
    std::cout << "seed " << s.seed << ": ";
    if (s.collapsed) {
      std::cout << "collapsed (" << s.error << ")\n";
    } else if (s.live) {
      std::cout << rn::eval_text("live", *s.live);
      if (s.ablated) std::cout << "        " << rn::eval_text("ablated", *s.ablated);
    } else {
      std::cout << "no evaluation\n";
    }
  }
  return result.all_collapsed() ? rn::kExitCollapse : rn::kExitOk;
}

int cmd_reproduce(const std::string& id, const std::string& budget, const std::string& out,
                  const std::vector<std::string>& only) {
  const auto r = rn::reproduce(id, budget, out, only);
  std::cout << rn::reproduce_text(r, rn::preset(id).at("title").get<std::string>());
  std::cout << "report directory: " << r.dir.string() << "\n";
  bool all_collapsed = !r.trainings.empty();
  for (const auto& [name, e] : r.trainings) all_collapsed = all_collapsed && e.all_collapsed();
  return all_collapsed ? rn::kExitCollapse : rn::kExitOk;
}

int cmd_evaluate(const std::string& path, int episodes, bool ablate, const std::string& arch,
                 const std::string& seed_base) {
  const auto ckpt = rn::checkpoint_load(path);
  std::optional<agents::Architecture> expected;
  if (!arch.empty()) expected = agents::parse_architecture(arch);
  std::optional<std::uint64_t> base;
  if (!seed_base.empty()) base = parse_seeds(seed_base).front();
  const auto report = rn::evaluate_checkpoint(ckpt, episodes, ablate, expected, base);
  std::cout << rn::kEvalCsvHeader << "\n" << rn::eval_csv_row(ablate ? "ablated" : "live", report) << "\n";
  std::cout << rn::eval_text(ablate ? "ablated" : "live", report);
  return rn::kExitOk;
}

int cmd_render(const std::string& path, int episodes, const std::string& seed_base) {
  if (episodes < 1) throw ConfigError("--episodes must be >= 1");
  const auto ckpt = rn::checkpoint_load(path);
  const std::uint64_t base = seed_base.empty() ? ckpt.meta.config.eval.seed_base : parse_seeds(seed_base).front();
  std::cout << rn::render_checkpoint(ckpt, episodes, base);
  return rn::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marl_lab: two-agent grid-world communication experiments"};
  app.require_subcommand(1);

  std::string config_path, seeds, out;
  auto* run = app.add_subcommand("run", "Train, evaluate and report every seed of a config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seeds", seeds, "Comma-separated seed list overriding the config");
  run->add_option("--out", out, "Output root overriding output.dir");

  std::string table, budget = "smoke", rout = "runs";
  std::vector<std::string> only;
  auto* rep = app.add_subcommand("reproduce", "Run a bundled table preset and compare with the published numbers");
  rep->add_option("table", table, "t3 | t4 | t5 | t6")->required();
  rep->add_option("--budget", budget, "smoke | paper | dry")->check(CLI::IsMember({"smoke", "paper", "dry"}));
  rep->add_option("--out", rout, "Output root");
  rep->add_option("--only", only, "Restrict to the named trainings of the preset");

  std::string ckpt;
  int episodes = 1000;
  bool ablate = false;
  std::string arch, seed_base;
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  ev->add_option("--episodes", episodes, "Evaluation episodes");
  ev->add_flag("--ablate-messages", ablate, "Replace every delivered message with the neutral one");
  ev->add_option("--architecture", arch, "Expected architecture; mismatches are rejected");
  ev->add_option("--seed-base", seed_base, "Evaluation seed base");

  std::string render_ckpt, render_seed;
  int render_episodes = 1;
  auto* rd = app.add_subcommand("render", "Replay evaluation episodes as text grids");
  rd->add_option("--checkpoint", render_ckpt, "Checkpoint file")->required();
  rd->add_option("--episodes", render_episodes, "Episodes to replay");
  rd->add_option("--seed-base", render_seed, "Evaluation seed base");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : runner::kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, seeds, out);
    if (*rep) return cmd_reproduce(table, budget, rout, only);
    if (*ev) return cmd_evaluate(ckpt, episodes, ablate, arch, seed_base);
    if (*rd) return cmd_render(render_ckpt, render_episodes, render_seed);
  } catch (const marl::ConfigError& e) {
    marl::log::error(e.what());
    return runner::kExitConfig;
  } catch (const marl::UsageError& e) {
    marl::log::error(e.what());
    return runner::kExitConfig;
  } catch (const marl::IoError& e) {
    marl::log::error(e.what());
    return runner::kExitIo;
  } catch (const marl::ParseError& e) {
    marl::log::error(e.what());
    return runner::kExitIo;
  } catch (const marl::IncompatibleError& e) {
    marl::log::error(e.what());
    return runner::kExitIo;
  } catch (const marl::NumericError& e) {
    marl::log::error(e.what());
    return runner::kExitCollapse;
  } catch (const std::exception& e) {
    marl::log::error(e.what());
    return 1;
  }
  return 0;
}
