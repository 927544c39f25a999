#include "propspec/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace propspec {

std::shared_ptr<spdlog::logger> logger() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
        auto lg = std::make_shared<spdlog::logger>("propspec", sink);
        lg->set_pattern("[%l] %v");
        lg->set_level(spdlog::level::warn);
        return lg;
    }();
    return instance;
}

} // namespace propspec
