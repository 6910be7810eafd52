#pragma once

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string_view>

namespace ocpik {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

inline std::optional<LogLevel> parse_log_level(std::string_view s) {
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return std::nullopt;
}

namespace detail {
inline LogLevel& log_level_storage() {
  static LogLevel level = [] {
    const char* env = std::getenv("OCPIK_LOG_LEVEL");
    if (env == nullptr) return LogLevel::Quiet;
    return parse_log_level(env).value_or(LogLevel::Info);
  }();
  return level;
}
}  // namespace detail

/// Read from OCPIK_LOG_LEVEL on first use; quiet when unset.
inline LogLevel log_level() { return detail::log_level_storage(); }
inline void set_log_level(LogLevel l) { detail::log_level_storage() = l; }

/// printf-style message to stderr when the current level admits it.
template <class... Args>
void log_message(LogLevel level, const char* fmt, Args... args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  if constexpr (sizeof...(Args) == 0) {
    std::fputs(fmt, stderr);
  } else {
    std::fprintf(stderr, fmt, args...);
  }
  std::fputc('\n', stderr);
}

}  // namespace ocpik
