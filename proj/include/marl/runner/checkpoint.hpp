#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "marl/agents.hpp"
#include "marl/errors.hpp"
#include "marl/runner/config.hpp"
#include "marl/training.hpp"

namespace marl::runner {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  long episode = 0;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::array<agents::Store, 2> params;

  /// Networks built from the stored config with the stored parameters.
  std::array<agents::PolicyNetwork, 2> networks() const {
    const auto acfg = meta.config.resolved_agent();
    std::array<agents::PolicyNetwork, 2> nets{agents::PolicyNetwork(acfg, 0), agents::PolicyNetwork(acfg, 0)};
    for (int a = 0; a < 2; ++a) copy_into(nets[a].params(), params[a]);
    return nets;
  }

  static void copy_into(agents::Store& dst, const agents::Store& src) {
    if (dst.size() != src.size()) throw IncompatibleError("checkpoint parameter count does not match the network");
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto& d = dst.params()[i];
      const auto& s = src.params()[i];
      if (d.name != s.name || d.rows != s.rows || d.cols != s.cols) {
        throw IncompatibleError("checkpoint parameter '" + s.name + "' does not match network parameter '" + d.name + "'");
      }
      d.value = s.value;
    }
  }
};

inline json store_to_json(const agents::Store& store) {
  json arr = json::array();
  for (const auto& p : store.params()) {
    arr.push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"value", p.value}});
  }
  return arr;
}

inline json checkpoint_to_json(const CheckpointMeta& meta, const agents::PolicyNetwork& a0,
                               const agents::PolicyNetwork& a1) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["architecture"] = agents::architecture_name(a0.config().architecture);
  j["config"] = to_json(meta.config);
  j["seed"] = meta.seed;
  j["episode"] = meta.episode;
  j["agents"] = json::array({store_to_json(a0.params()), store_to_json(a1.params())});
  return j;
}

/// Writes via a temporary file so a crash never leaves a half-written checkpoint.
inline void checkpoint_save(const std::filesystem::path& path, const CheckpointMeta& meta,
                            const agents::PolicyNetwork& a0, const agents::PolicyNetwork& a1) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + tmp + "'");
    out << checkpoint_to_json(meta, a0, a1).dump();
    if (!out) throw IoError("failed writing checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format_version")) throw ParseError("checkpoint has no format_version");
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kCheckpointFormatVersion) {
    throw IncompatibleError("checkpoint format_version " + j["format_version"].dump() + " is not supported (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
  }
  Checkpoint c;
  try {
    c.meta.config = config_from_json(j.at("config"));
    c.meta.seed = j.at("seed").get<std::uint64_t>();
    c.meta.episode = j.at("episode").get<long>();
    const auto arch = agents::parse_architecture(j.at("architecture").get<std::string>());
    if (arch != c.meta.config.agent.architecture) throw ParseError("checkpoint architecture disagrees with its config");
    const auto& agents_j = j.at("agents");
    if (!agents_j.is_array() || agents_j.size() != 2) throw ParseError("checkpoint must hold exactly two agents");
    for (int a = 0; a < 2; ++a) {
      for (const auto& pj : agents_j[a]) {
        const auto h = c.params[a].add(pj.at("name").get<std::string>(), pj.at("rows").get<int>(), pj.at("cols").get<int>());
        auto values = pj.at("value").get<std::vector<double>>();
        if (values.size() != c.params[a][h].size()) throw ParseError("checkpoint parameter '" + c.params[a][h].name + "' has the wrong size");
        c.params[a][h].value = std::move(values);
      }
    }
    (void)c.networks();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint config is invalid: ") + e.what());
  }
  return c;
}

inline Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Refuses to evaluate a checkpoint under a different architecture or an
/// environment whose observation width it was not trained for.
inline void require_compatible(const Checkpoint& c, agents::Architecture expected, const env::GridConfig& env_cfg) {
  if (c.meta.config.agent.architecture != expected) {
    throw ConfigError(std::string("architecture mismatch: checkpoint holds a ") +
                      agents::architecture_name(c.meta.config.agent.architecture) + " model but a " +
                      agents::architecture_name(expected) + " model was requested");
  }
  if (c.meta.config.env.observation_size() != env_cfg.observation_size()) {
    throw ConfigError("environment observation size " + std::to_string(env_cfg.observation_size()) +
                      " does not match the checkpoint's " + std::to_string(c.meta.config.env.observation_size()));
  }
}

}  // namespace marl::runner
