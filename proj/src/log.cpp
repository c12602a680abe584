#include "rlms/log.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace rlms {

namespace {

std::optional<LogLevel>& override_level() {
    static std::optional<LogLevel> level;
    return level;
}

void emit(LogLevel at, const char* tag, std::string_view msg) {
    if (static_cast<int>(at) > static_cast<int>(log_level())) return;
    std::cerr << "[" << tag << "] " << msg << '\n';
}

}  // namespace

LogLevel log_level() {
    if (override_level()) return *override_level();
    const char* env = std::getenv("RLMS_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
}

void set_log_level(LogLevel level) {
    override_level() = level;
}

void log_error(std::string_view msg) {
    emit(LogLevel::error, "error", msg);
}
void log_warn(std::string_view msg) {
    emit(LogLevel::info, "warn", msg);
}
void log_info(std::string_view msg) {
    emit(LogLevel::info, "info", msg);
}
void log_debug(std::string_view msg) {
    emit(LogLevel::debug, "debug", msg);
}

}  // namespace rlms
