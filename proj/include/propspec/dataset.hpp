#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "propspec/matrix.hpp"
#include "propspec/task.hpp"

namespace propspec {

/// Sequences with one response each. Classification targets are class ids
/// (stored as doubles) indexing into class_names.
struct Dataset {
    Task task = Task::Regression;
    std::vector<std::string> sequences;
    std::vector<double> targets;
    std::vector<std::string> class_names;
    std::size_t dropped_count = 0;

    std::size_t size() const noexcept { return sequences.size(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }
    Dataset subset(std::span<const std::size_t> indices) const;
};

struct DatasetSchema {
    std::string sequence_column = "sequence";
    std::string target_column = "target";
};

/// Parses CSV text with a header row. Rows with an empty sequence or an
/// empty/NaN target are dropped and counted; class labels get contiguous ids
/// in first-appearance order.
Dataset parse_dataset(std::string_view csv_text, const DatasetSchema& schema, Task task);
Dataset load_dataset(const std::string& path, const DatasetSchema& schema, Task task);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Deterministic shuffled split. The test size is round(n * test_fraction)
/// clamped to [1, n - 1]. With stratification each class receives
/// floor(n_c * f) test rows and the remainder is handed out by largest
/// fractional part (lower class id on ties); singleton classes stay in train.
SplitIndices split_indices(const Dataset& ds, double test_fraction, std::uint64_t seed, bool stratify);

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed,
                                          bool stratify);

/// Per-feature range fitted on training data.
struct MinMaxScaler {
    Vector min;
    Vector max;

    Eigen::Index dimension() const noexcept { return min.size(); }
};

MinMaxScaler fit_minmax(const Matrix& features);

/// (x - min) / (max - min) clipped to [0, 1]; constant features map to 0.
Matrix apply_minmax(const MinMaxScaler& scaler, const Matrix& features);

} // namespace propspec
