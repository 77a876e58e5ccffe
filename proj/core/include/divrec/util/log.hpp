#pragma once

#include <string_view>

namespace divrec::util {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kQuiet = 4 };

// Process-wide threshold; initialised from DIVREC_LOG (debug|info|warn|error|quiet).
void set_log_level(LogLevel level);
LogLevel log_level();

void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log(LogLevel::kInfo, m); }
inline void log_warn(std::string_view m) { log(LogLevel::kWarn, m); }
inline void log_debug(std::string_view m) { log(LogLevel::kDebug, m); }

}  // namespace divrec::util
