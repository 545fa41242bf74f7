#pragma once

#include <functional>
#include <string_view>

namespace deepforest {

enum class LogLevel { info, warning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Installs a process-wide sink for library diagnostics. The default sink
// writes warnings to stderr and drops info messages. Returns the old sink.
LogSink set_log_sink(LogSink sink);

void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace deepforest
