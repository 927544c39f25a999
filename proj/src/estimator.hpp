#pragma once

#include <cstdint>
#include <memory>
#include <span>

#include <json.hpp>

#include "propspec/models.hpp"

namespace propspec::detail {

struct FitData {
    const Matrix& X;
    std::span<const double> y;
    Task task;
    int num_classes;  ///< 0 for regression
};

class Estimator {
public:
    virtual ~Estimator() = default;
    virtual Prediction predict(const Matrix& X) const = 0;
    virtual nlohmann::json to_json() const = 0;
};

using EstimatorPtr = std::unique_ptr<Estimator>;

EstimatorPtr fit_knn(const ModelSpec& spec, const FitData& data);
EstimatorPtr knn_from_json(const ModelSpec& spec, const nlohmann::json& doc);

EstimatorPtr fit_decision_tree(const ModelSpec& spec, const FitData& data);
EstimatorPtr fit_random_forest(const ModelSpec& spec, const FitData& data);
EstimatorPtr fit_bagging(const ModelSpec& spec, const FitData& data);
EstimatorPtr tree_ensemble_from_json(const ModelSpec& spec, const nlohmann::json& doc);

EstimatorPtr fit_adaboost(const ModelSpec& spec, const FitData& data);
EstimatorPtr adaboost_from_json(const ModelSpec& spec, const nlohmann::json& doc);

EstimatorPtr fit_gradient_boosting(const ModelSpec& spec, const FitData& data);
EstimatorPtr gradient_boosting_from_json(const ModelSpec& spec, const nlohmann::json& doc);

EstimatorPtr fit_gaussian_nb(const ModelSpec& spec, const FitData& data);
EstimatorPtr fit_bernoulli_nb(const ModelSpec& spec, const FitData& data);
EstimatorPtr naive_bayes_from_json(const ModelSpec& spec, const nlohmann::json& doc);

EstimatorPtr fit_linear(const ModelSpec& spec, const FitData& data);
EstimatorPtr fit_svm_linear(const ModelSpec& spec, const FitData& data);
EstimatorPtr linear_from_json(const ModelSpec& spec, const nlohmann::json& doc);

// shared helpers ------------------------------------------------------------

/// Normalizes every row of `scores` to sum 1 (uniform when a row sums to 0)
/// and sets values to the arg-max class, lowest id on ties.
Prediction finalize_classification(Matrix scores);

Prediction regression_prediction(std::vector<double> values);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& doc);

} // namespace propspec::detail
