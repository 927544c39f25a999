#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "propspec/task.hpp"

namespace propspec {

struct MetricsReport {
    Task task{};
    std::map<std::string, double> values;
    /// Notes such as "precision_zero_division" for metrics set to 0 because
    /// their denominator vanished.
    std::vector<std::string> flags;

    double at(const std::string& name) const;
};

/// Binary metrics for `positive_class`, or macro averages over the labels
/// seen in either vector when `positive_class` is empty.
MetricsReport classification_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                                     std::optional<int> positive_class);

/// Binary with positive class 1 for two classes, macro otherwise.
MetricsReport classification_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                                     int num_classes);

/// Pearson, Kendall tau-a, Spearman (average ranks), R score and RMSE.
/// Throws DegenerateData("degenerate target") for a constant y_true.
MetricsReport regression_metrics(std::span<const double> y_true, std::span<const double> y_pred);

double pearson(std::span<const double> x, std::span<const double> y);
double kendall_tau_a(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

std::string default_primary_metric(Task task);
/// Throws InvalidArgument unless `name` is a higher-is-better metric of `task`.
void validate_primary_metric(Task task, const std::string& name);
std::vector<std::string> metric_names(Task task);

} // namespace propspec
