#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace infograph {

enum class LogLevel { Info, Warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

inline LogSink& log_sink() {
  static LogSink sink = [](LogLevel level, const std::string& msg) {
    std::cerr << (level == LogLevel::Warning ? "[warn] " : "[info] ") << msg << '\n';
  };
  return sink;
}

inline void log_info(const std::string& msg) {
  if (log_sink()) log_sink()(LogLevel::Info, msg);
}

inline void log_warning(const std::string& msg) {
  if (log_sink()) log_sink()(LogLevel::Warning, msg);
}

// Replaces the sink for the guard's lifetime (tests use it to capture or mute).
class ScopedLogSink {
 public:
  explicit ScopedLogSink(LogSink sink) : previous_(std::move(log_sink())) { log_sink() = std::move(sink); }
  ~ScopedLogSink() { log_sink() = std::move(previous_); }
  ScopedLogSink(const ScopedLogSink&) = delete;
  ScopedLogSink& operator=(const ScopedLogSink&) = delete;

 private:
  LogSink previous_;
};

}  // namespace infograph
