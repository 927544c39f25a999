#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "propspec/matrix.hpp"
#include "propspec/task.hpp"

namespace propspec {

enum class ModelFamily {
    Knn,
    DecisionTree,
    RandomForest,
    Bagging,
    AdaBoost,
    GradientBoosting,
    GaussianNb,
    BernoulliNb,
    Linear,     ///< ridge (regression) / L2 logistic (classification)
    SvmLinear,  ///< linear-kernel margin model trained by subgradient descent
};

std::string_view to_string(ModelFamily family);
ModelFamily parse_family(std::string_view text);

using ParamValue = std::variant<bool, std::int64_t, double, std::string>;
using Hyperparameters = std::map<std::string, ParamValue>;

struct ModelSpec {
    ModelFamily family{};
    Task task{};
    Hyperparameters params;

    /// e.g. "knn(metric=euclidean,n_neighbors=3,weights=uniform)"; the seed
    /// is omitted. Used as a stable identifier in reports.
    std::string label() const;

    std::int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t seed() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

nlohmann::json to_json(const Hyperparameters& params);
Hyperparameters hyperparameters_from_json(const nlohmann::json& doc);

/// Deterministic exploration grid for a task. Every stochastic learner gets
/// `seed` as its "seed" hyperparameter.
std::vector<ModelSpec> enumerate_model_grid(Task task, std::uint64_t seed = 0);

/// At most `max_models` specs drawn round-robin across families so that a
/// truncated grid keeps every family represented. Order is deterministic.
std::vector<ModelSpec> cap_model_grid(const std::vector<ModelSpec>& grid, std::size_t max_models);

/// Model output. For classification `values` holds class ids and `scores`
/// one row per sample with non-negative entries summing to 1.
struct Prediction {
    std::vector<double> values;
    Matrix scores;
};

namespace detail {
class Estimator;
}

/// A fitted, immutable model; cheap to copy and safe to share across threads.
class TrainedModel {
public:
    TrainedModel(ModelSpec spec, std::shared_ptr<const detail::Estimator> impl, Eigen::Index feature_dim,
                 int num_classes);

    const ModelSpec& spec() const noexcept { return spec_; }
    Eigen::Index feature_dim() const noexcept { return feature_dim_; }
    int num_classes() const noexcept { return num_classes_; }

    /// Throws InvalidArgument when X has the wrong number of columns.
    Prediction predict(const Matrix& X) const;

    /// Fitted parameters only (spec is stored separately in bundles).
    nlohmann::json parameters() const;
    static TrainedModel from_parameters(const ModelSpec& spec, const nlohmann::json& parameters);

    std::map<std::string, double> cv_scores;

private:
    ModelSpec spec_;
    std::shared_ptr<const detail::Estimator> impl_;
    Eigen::Index feature_dim_;
    int num_classes_;
};

/// Fits `spec` to (X, y). For classification y holds ids in [0, num_classes).
/// Throws DegenerateData for a training set with fewer than two classes.
TrainedModel train_model(const ModelSpec& spec, const Matrix& X, std::span<const double> y, int num_classes = 0);

} // namespace propspec
