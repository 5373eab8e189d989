#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/errors.hpp"
#include "marl/training.hpp"

namespace marl::runner {

using json = nlohmann::json;

/// %.17g: round-trips every double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline const char* kMetricsHeader =
    "episode,return,length,terminated,direct_success,lr,"
    "loss_actor_0,loss_critic_0,loss_entropy_0,loss_actor_1,loss_critic_1,loss_entropy_1";

inline std::string metrics_row(const training::EpisodeMetrics& m) {
  std::string s = std::to_string(m.episode) + "," + fmt_double(m.total_return) + "," + std::to_string(m.length) + "," +
                  (m.terminated ? "1" : "0") + "," + (m.direct_success ? "1" : "0") + "," + fmt_double(m.lr);
  for (const auto& l : m.loss) s += "," + fmt_double(l.actor) + "," + fmt_double(l.critic) + "," + fmt_double(l.entropy);
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Streams metrics rows to a CSV file as episodes complete.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write metrics file '" + path.string() + "'");
    out_ << kMetricsHeader << '\n';
  }

  void write(const training::EpisodeMetrics& m) {
    out_ << metrics_row(m) << '\n';
    if (!out_) throw IoError("failed writing metrics file '" + path_.string() + "'");
  }

  void flush() { out_.flush(); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Append-only JSONL log of {type, timestamp, payload} rows.
///
/// Episode rows must have strictly increasing payload["episode"]; checkpoint
/// rows must name a file that exists.
class RunRecord {
 public:
  explicit RunRecord(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw IoError("cannot open run log '" + path.string() + "'");
  }

  void episode(const json& payload) {
    const long ep = payload.at("episode").get<long>();
    if (ep <= last_episode_) {
      throw UsageError("run log episode " + std::to_string(ep) + " does not follow " + std::to_string(last_episode_));
    }
    last_episode_ = ep;
    append("episode", payload);
  }

  void checkpoint(const std::filesystem::path& file, long episode) {
    if (!std::filesystem::exists(file)) throw UsageError("checkpoint row references missing file '" + file.string() + "'");
    append("checkpoint", json{{"file", file.filename().string()}, {"episode", episode}});
  }

  void eval(const json& payload) { append("eval", payload); }

  void flush() { out_.flush(); }

 private:
  void append(const char* type, const json& payload) {
    json row{{"type", type}, {"timestamp", timestamp()}, {"payload", payload}};
    out_ << row.dump() << '\n';
    if (!out_) throw IoError("failed writing run log '" + path_.string() + "'");
  }

  static std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::filesystem::path path_;
  std::ofstream out_;
  long last_episode_ = -1;
};

inline json episode_payload(const training::EpisodeMetrics& m) {
  json j{{"episode", m.episode},
         {"return", m.total_return},
         {"length", m.length},
         {"terminated", m.terminated},
         {"direct_success", m.direct_success},
         {"lr", m.lr}};
  json losses = json::array();
  for (const auto& l : m.loss) {
    losses.push_back({{"actor", l.actor}, {"critic", l.critic}, {"entropy", l.entropy}, {"skipped", l.skipped}});
  }
  j["loss"] = losses;
  return j;
}

/// Trailing moving average with window min(window, i + 1).
inline std::vector<double> moving_average(std::span<const double> xs, int window) {
  std::vector<double> out(xs.size());
  double acc = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<std::size_t>(window)) acc -= xs[i - window];
    out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> y;
};

/// One panel per series: episode on x, value on y, drawn as a polyline.
inline std::string svg_curves(const std::string& title, std::span<const Series> series, int max_points = 1000) {
  const int width = 640, panel_h = 220, margin = 50;
  const int height = margin + static_cast<int>(series.size()) * (panel_h + margin);
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                  std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(margin) + "\" y=\"24\" font-size=\"14\">" + title + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    const int top = margin + static_cast<int>(k) * (panel_h + margin);
    const int left = margin, plot_w = width - 2 * margin;
    s += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top) + "\" width=\"" + std::to_string(plot_w) +
         "\" height=\"" + std::to_string(panel_h) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    s += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top - 6) + "\">" + ser.label + "</text>\n";
    if (ser.y.empty()) continue;
    double lo = *std::min_element(ser.y.begin(), ser.y.end());
    double hi = *std::max_element(ser.y.begin(), ser.y.end());
    if (hi - lo < 1e-12) {
      hi += 0.5;
      lo -= 0.5;
    }
    s += "<text x=\"4\" y=\"" + std::to_string(top + 10) + "\">" + fmt_fixed(hi, 2) + "</text>\n";
    s += "<text x=\"4\" y=\"" + std::to_string(top + panel_h) + "\">" + fmt_fixed(lo, 2) + "</text>\n";
    s += "<text x=\"" + std::to_string(left + plot_w - 60) + "\" y=\"" + std::to_string(top + panel_h + 16) +
         "\">episode " + std::to_string(ser.y.size()) + "</text>\n";
    const std::size_t n = ser.y.size();
    const std::size_t stride = std::max<std::size_t>(1, n / static_cast<std::size_t>(max_points));
    s += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; i += stride) {
      const double x = left + (n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1) * plot_w);
      const double y = top + panel_h - (ser.y[i] - lo) / (hi - lo) * panel_h;
      s += fmt_fixed(x, 1) + "," + fmt_fixed(y, 1) + " ";
    }
    s += "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline std::string learning_curves_svg(const std::string& title, std::span<const training::EpisodeMetrics> metrics,
                                       int window = 500) {
  std::vector<double> ret, direct, success;
  for (const auto& m : metrics) {
    ret.push_back(m.total_return);
    direct.push_back(m.direct_success ? 1.0 : 0.0);
    success.push_back(m.terminated ? 1.0 : 0.0);
  }
  const std::vector<Series> series{
      {"moving-average return (window " + std::to_string(window) + ")", "#1f77b4", moving_average(ret, window)},
      {"moving-average success", "#2ca02c", moving_average(success, window)},
      {"moving-average direct success", "#d62728", moving_average(direct, window)}};
  return svg_curves(title, series);
}

}  // namespace marl::runner
