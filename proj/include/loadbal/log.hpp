#pragma once

#include <cstdlib>
#include <ostream>
#include <string>
#include <string_view>

namespace loadbal::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Level from LOADBAL_LOG={error|info|debug}; error when unset or unknown.
inline Level level_from_env() {
    const char* raw = std::getenv("LOADBAL_LOG");
    if (!raw) return Level::Error;
    const std::string_view v(raw);
    if (v == "debug") return Level::Debug;
    if (v == "info") return Level::Info;
    return Level::Error;
}

class Logger {
public:
    Logger(std::ostream& sink, Level level) : sink_(&sink), level_(level) {}

    void error(std::string_view msg) const { write(Level::Error, "error", msg); }
    void info(std::string_view msg) const { write(Level::Info, "info", msg); }
    void debug(std::string_view msg) const { write(Level::Debug, "debug", msg); }

private:
    void write(Level at, std::string_view tag, std::string_view msg) const {
        if (static_cast<int>(at) <= static_cast<int>(level_)) *sink_ << "[loadbal " << tag << "] " << msg << '\n';
    }

    std::ostream* sink_;
    Level level_;
};

}  // namespace loadbal::log
