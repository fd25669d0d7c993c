#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace ampg::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold read once from AMPG_LOG (error|warn|info|debug); default warn.
inline Level threshold() {
  static Level lvl = [] {
    const char* env = std::getenv("AMPG_LOG");
    if (env == nullptr) return Level::warn;
    if (std::strcmp(env, "error") == 0) return Level::error;
    if (std::strcmp(env, "info") == 0) return Level::info;
    if (std::strcmp(env, "debug") == 0) return Level::debug;
    return Level::warn;
  }();
  return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
  if (lvl > threshold()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[ampg:%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void error(const std::string& m) { emit(Level::error, m); }
inline void warn(const std::string& m) { emit(Level::warn, m); }
inline void info(const std::string& m) { emit(Level::info, m); }
inline void debug(const std::string& m) { emit(Level::debug, m); }

}  // namespace ampg::log
