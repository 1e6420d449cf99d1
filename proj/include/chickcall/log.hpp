#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace chickcall::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

// Log level comes from CHICKCALL_LOG (debug|info|warn|error); default warn.
inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("CHICKCALL_LOG");
        if (!env) return Level::warn;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        if (std::strcmp(env, "info") == 0) return Level::info;
        if (std::strcmp(env, "error") == 0) return Level::error;
        return Level::warn;
    }();
    return lvl;
}

inline void write(Level lvl, const std::string& msg) {
    if (lvl < threshold()) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::fprintf(stderr, "[chickcall %s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace chickcall::log
