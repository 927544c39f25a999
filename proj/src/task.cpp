#include "propspec/task.hpp"

#include "propspec/error.hpp"

namespace propspec {

std::string_view to_string(Task task) {
    return task == Task::Regression ? "regression" : "classification";
}

Task parse_task(std::string_view text) {
    if (text == "regression") return Task::Regression;
    if (text == "classification") return Task::Classification;
    throw InvalidArgument("unknown task '" + std::string(text) +
                          "' (expected classification or regression)");
}

} // namespace propspec
