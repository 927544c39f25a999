#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "propspec/matrix.hpp"
#include "propspec/metrics.hpp"
#include "propspec/models.hpp"

namespace propspec {

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;  ///< ascending
};

/// Deterministic k-fold assignment. Indices are shuffled (per class for
/// classification, classes in id order) and dealt round-robin, so fold
/// sizes differ by at most one and class proportions are preserved.
/// Requires 2 <= k <= |y|.
std::vector<Fold> kfold_indices(std::span<const double> y, Task task, int k, std::uint64_t seed);

struct CvResult {
    std::vector<MetricsReport> folds;
    /// Folds left out of the mean: single-class validation folds for
    /// classification, folds whose metrics are undefined for regression.
    std::vector<bool> flagged;
    std::map<std::string, double> mean;
    std::string primary_metric;
    double primary = 0.0;
    /// Out-of-fold predictions aligned with y (class ids for classification).
    std::vector<double> oof_values;
    /// Out-of-fold class scores; empty for regression.
    Matrix oof_scores;
};

/// Fits `spec` on each set of training folds after refitting a min-max
/// scaler on them, scores the held-out fold and averages the metrics over
/// unflagged folds (all folds when every fold is flagged). X is unscaled.
CvResult kfold_cv(const ModelSpec& spec, const Matrix& X, std::span<const double> y, int num_classes,
                  const std::vector<Fold>& folds, const std::string& primary_metric);

CvResult kfold_cv(const ModelSpec& spec, const Matrix& X, std::span<const double> y, int num_classes, int k,
                  std::uint64_t seed, const std::string& primary_metric);

Matrix select_rows(const Matrix& X, std::span<const std::size_t> rows);
std::vector<double> select(std::span<const double> v, std::span<const std::size_t> rows);

} // namespace propspec
