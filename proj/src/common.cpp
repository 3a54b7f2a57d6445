#include "kinv/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace kinv {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("KINV_LOG");
        if (env == nullptr) return LogLevel::error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        return LogLevel::error;
    }();
    return level;
}

void log_error(const std::string& msg) {
    std::fprintf(stderr, "[kinv] error: %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info)
        std::fprintf(stderr, "[kinv] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug)
        std::fprintf(stderr, "[kinv] debug: %s\n", msg.c_str());
}

} // namespace kinv
