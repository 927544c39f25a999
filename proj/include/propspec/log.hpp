#pragma once

#include <memory>

#include <spdlog/logger.h>

namespace propspec {

/// Library-wide logger writing to stderr. Callers may change its level.
std::shared_ptr<spdlog::logger> logger();

} // namespace propspec
