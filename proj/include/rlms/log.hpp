#pragma once

#include <string_view>

namespace rlms {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// From RLMS_LOG (error, info, debug); info when unset or unrecognized.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(std::string_view msg);
void log_warn(std::string_view msg);  // shown at info and above
void log_info(std::string_view msg);
void log_debug(std::string_view msg);

}  // namespace rlms
