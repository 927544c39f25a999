#pragma once

#include <string>
#include <string_view>

namespace propspec {

enum class Task { Regression, Classification };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

} // namespace propspec
