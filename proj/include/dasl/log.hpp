#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace dasl {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Verbosity comes from DASL_LOG={error,info,debug}; default is error-only.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("DASL_LOG");
    if (env == nullptr) return LogLevel::Error;
    const std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

inline void log_line(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  const char* prefix =
      level == LogLevel::Error ? "error" : (level == LogLevel::Info ? "info" : "debug");
  std::cerr << "[" << prefix << "] " << msg << "\n";
}

#define DASL_LOG_INFO(expr)                                        \
  do {                                                             \
    if (::dasl::log_level() >= ::dasl::LogLevel::Info) {           \
      std::ostringstream oss__;                                    \
      oss__ << expr;                                               \
      ::dasl::log_line(::dasl::LogLevel::Info, oss__.str());       \
    }                                                              \
  } while (0)

#define DASL_LOG_DEBUG(expr)                                       \
  do {                                                             \
    if (::dasl::log_level() >= ::dasl::LogLevel::Debug) {          \
      std::ostringstream oss__;                                    \
      oss__ << expr;                                               \
      ::dasl::log_line(::dasl::LogLevel::Debug, oss__.str());      \
    }                                                              \
  } while (0)

}  // namespace dasl
