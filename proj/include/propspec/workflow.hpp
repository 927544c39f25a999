#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "propspec/cross_validation.hpp"
#include "propspec/dataset.hpp"
#include "propspec/ensemble.hpp"

namespace propspec {

struct TrainConfig {
    Task task = Task::Regression;
    std::uint64_t seed = 0;
    int k_folds = 5;
    double test_fraction = 0.2;
    bool stratify = true;
    ResiduePolicy residue_policy = ResiduePolicy::Error;
    std::string primary_metric;            ///< empty = task default
    int jobs = 1;
    std::size_t max_models = 0;            ///< 0 = full grid
    std::optional<std::size_t> padded_length;
    bool calibrate = true;
};

struct PoolEntry {
    std::string group_id;
    ModelSpec spec;
    std::optional<CvResult> cv;  ///< empty when every fold failed to fit
    std::string error;
};

struct ConstituentResult {
    std::string group_id;
    std::string model;
    MetricsReport test_metrics;
};

struct TrainResult {
    TrainConfig config;
    std::string primary_metric;
    std::size_t dropped_count = 0;
    SplitIndices split;
    std::vector<PoolEntry> pool;
    std::vector<std::size_t> selected;  ///< indices into pool, ensemble member order
    EnsembleModel ensemble;
    std::optional<MetricsReport> test_metrics_raw;
    std::optional<MetricsReport> test_metrics;  ///< after calibration for regression
    std::vector<ConstituentResult> constituents;
    std::vector<double> train_predictions;  ///< aligned with split.train

    nlohmann::json report() const;
};

/// Split, encode every group, cross-validate the (capped) grid on each group,
/// select outliers, refit them on the full training split, assemble, calibrate
/// on out-of-fold predictions and score the held-out split.
TrainResult train_ensemble(const Dataset& dataset, const DescriptorTable& descriptors, const TrainConfig& config);

} // namespace propspec
