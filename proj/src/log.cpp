#include "satlog/log.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>

namespace satlog {

namespace {

LogLevel initial_level() {
  const char* env = std::getenv("SATLOG_LOG_LEVEL");
  if (!env) return LogLevel::kWarn;
  if (!std::strcmp(env, "debug")) return LogLevel::kDebug;
  if (!std::strcmp(env, "info")) return LogLevel::kInfo;
  if (!std::strcmp(env, "error")) return LogLevel::kError;
  if (!std::strcmp(env, "off")) return LogLevel::kOff;
  return LogLevel::kWarn;
}

std::atomic<LogLevel>& level_ref() {
  static std::atomic<LogLevel> level{initial_level()};
  return level;
}

}  // namespace

void set_log_level(LogLevel level) noexcept { level_ref().store(level); }
LogLevel log_level() noexcept { return level_ref().load(); }

void log_message(LogLevel level, std::string_view message) {
  if (level < log_level()) return;
  static std::mutex mu;
  static const char* names[] = {"debug", "info", "warn", "error", "off"};
  std::lock_guard lock(mu);
  std::cerr << "satlog[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace satlog
