#include "deepforest/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace deepforest {
namespace {

std::mutex g_sink_mutex;

void default_sink(LogLevel level, std::string_view message) {
  if (level == LogLevel::warning) std::cerr << "warning: " << message << '\n';
}

LogSink& sink_ref() {
  static LogSink sink = default_sink;
  return sink;
}

void emit(LogLevel level, std::string_view message) {
  std::lock_guard lock(g_sink_mutex);
  if (sink_ref()) sink_ref()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(g_sink_mutex);
  return std::exchange(sink_ref(), std::move(sink));
}

void log_info(std::string_view message) { emit(LogLevel::info, message); }
void log_warning(std::string_view message) { emit(LogLevel::warning, message); }

}  // namespace deepforest
