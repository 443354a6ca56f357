#pragma once

#include <string_view>

namespace satlog {

enum class LogLevel { kDebug, kInfo, kWarn, kError, kOff };

// Diagnostics go to stderr. Default level is kWarn; SATLOG_LOG_LEVEL
// (debug|info|warn|error|off) overrides it at startup.
void set_log_level(LogLevel level) noexcept;
LogLevel log_level() noexcept;

void log_message(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log_message(LogLevel::kInfo, m); }
inline void log_warn(std::string_view m) { log_message(LogLevel::kWarn, m); }
inline void log_error(std::string_view m) { log_message(LogLevel::kError, m); }

}  // namespace satlog
