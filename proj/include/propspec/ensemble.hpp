#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "propspec/dataset.hpp"
#include "propspec/encoding.hpp"
#include "propspec/models.hpp"
#include "propspec/propgroups.hpp"

namespace propspec {

inline constexpr int kBundleSchemaVersion = 1;

struct ScoredModel {
    TrainedModel model;
    std::string group_id;
    double validation_score = 0.0;
};

/// Indices of pool entries above the Tukey upper fence Q3 + 1.5 IQR
/// (linear-interpolation quartiles); when none qualify, the top
/// max(1, ceil(5% of pool)). Only the best entry per (group, family) is kept.
/// Output is ordered by descending score, then pool index.
std::vector<std::size_t> select_outlier_indices(std::span<const double> scores,
                                                std::span<const std::string> group_ids,
                                                std::span<const ModelFamily> families);

std::vector<ScoredModel> select_outlier_models(const std::vector<ScoredModel>& pool);

/// w_i = s'_i / sum s'_j with s'_i = s_i - min(0, min_j s_j) + 1e-6.
std::vector<double> ensemble_weights(std::span<const double> scores);

/// Affine map fitted as pred ~ slope * true + intercept; applied inversely.
struct Calibration {
    double slope = 1.0;
    double intercept = 0.0;

    double apply(double raw) const { return (raw - intercept) / slope; }
};

/// Least-squares line of pred against truth. Empty (with a warning) when
/// |slope| < 1e-6. Throws for fewer than 3 points or constant truth or
/// constant predictions.
std::optional<Calibration> fit_calibration(std::span<const double> predicted, std::span<const double> truth);

struct EnsembleModel {
    Task task = Task::Regression;
    std::vector<ScoredModel> members;
    std::vector<double> weights;
    std::optional<Calibration> calibration;

    DescriptorTable descriptor_table;
    std::size_t padded_length = 0;
    ResiduePolicy residue_policy = ResiduePolicy::Error;
    std::map<std::string, MinMaxScaler> scalers;
    std::vector<std::string> class_names;

    int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Members and weights only; the caller fills in the encoding metadata.
EnsembleModel assemble(std::vector<ScoredModel> selected, Task task);

/// Weighted average (regression, before calibration) or weighted soft vote
/// (classification) of per-member predictions.
Prediction combine_predictions(Task task, std::span<const double> weights, std::span<const Prediction> predictions);

struct RowPrediction {
    double value = 0.0;          ///< calibrated value or class id
    double raw_value = 0.0;      ///< before calibration (regression)
    std::vector<double> scores;  ///< class scores (classification)
    std::string error;           ///< non-empty when the row could not be predicted

    bool ok() const noexcept { return error.empty(); }
};

struct BatchPrediction {
    std::vector<RowPrediction> rows;
    std::size_t failed = 0;
};

/// Encodes, scales and predicts each sequence. Rows that cannot be encoded
/// get an error entry; throws only when every row of a non-empty batch fails.
BatchPrediction ensemble_predict(const EnsembleModel& ensemble, std::span<const std::string> sequences,
                                 int jobs = 1);

/// Sets the calibration from predictions the ensemble currently produces.
/// An existing calibration is composed with the new fit.
EnsembleModel calibrate(EnsembleModel ensemble, std::span<const double> validation_pred,
                        std::span<const double> validation_true);

nlohmann::json bundle_to_json(const EnsembleModel& ensemble);
EnsembleModel bundle_from_json(const nlohmann::json& doc);
void save_bundle(const EnsembleModel& ensemble, const std::string& path);
EnsembleModel load_bundle(const std::string& path);

} // namespace propspec
