#include "divrec/util/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string>

namespace divrec::util {

namespace {

LogLevel from_env() {
  const char* env = std::getenv("DIVREC_LOG");
  if (!env) return LogLevel::kInfo;
  const std::string v = env;
  if (v == "debug") return LogLevel::kDebug;
  if (v == "warn") return LogLevel::kWarn;
  if (v == "error") return LogLevel::kError;
  if (v == "quiet") return LogLevel::kQuiet;
  return LogLevel::kInfo;
}

std::atomic<LogLevel>& level_ref() {
  static std::atomic<LogLevel> level{from_env()};
  return level;
}

}  // namespace

void set_log_level(LogLevel level) { level_ref() = level; }
LogLevel log_level() { return level_ref(); }

void log(LogLevel level, std::string_view message) {
  if (level < level_ref().load()) return;
  static const char* const names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[divrec " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace divrec::util
