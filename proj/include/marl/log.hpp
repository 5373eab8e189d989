#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace marl::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Parsed once from MARL_LOG_LEVEL (error | info | debug); defaults to info.
inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("MARL_LOG_LEVEL");
    const std::string_view v = env != nullptr ? env : "info";
    if (v == "error") return Level::error;
    if (v == "debug") return Level::debug;
    return Level::info;
  }();
  return level;
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(threshold()); }

inline void write(Level l, std::string_view tag, std::string_view msg) {
  if (enabled(l)) std::cerr << "[" << tag << "] " << msg << '\n';
}

inline void error(std::string_view msg) { write(Level::error, "error", msg); }
// Warnings are shown at info level and above.
inline void warn(std::string_view msg) { write(Level::info, "warn", msg); }
inline void info(std::string_view msg) { write(Level::info, "info", msg); }
inline void debug(std::string_view msg) { write(Level::debug, "debug", msg); }

}  // namespace marl::log
