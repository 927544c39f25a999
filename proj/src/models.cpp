#include "propspec/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "estimator.hpp"
#include "propspec/error.hpp"

namespace propspec {
namespace {

constexpr std::pair<ModelFamily, std::string_view> kFamilyNames[] = {
    {ModelFamily::Knn, "knn"},
    {ModelFamily::DecisionTree, "decision_tree"},
    {ModelFamily::RandomForest, "random_forest"},
    {ModelFamily::Bagging, "bagging"},
    {ModelFamily::AdaBoost, "adaboost"},
    {ModelFamily::GradientBoosting, "gradient_boosting"},
    {ModelFamily::GaussianNb, "gaussian_nb"},
    {ModelFamily::BernoulliNb, "bernoulli_nb"},
    {ModelFamily::Linear, "linear"},
    {ModelFamily::SvmLinear, "svm_linear"},
};

std::string format_double(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string format_param(const ParamValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>)
                return x ? "true" : "false";
            else if constexpr (std::is_same_v<T, std::int64_t>)
                return std::to_string(x);
            else if constexpr (std::is_same_v<T, double>)
                return format_double(x);
            else
                return x;
        },
        v);
}

const ParamValue& lookup(const ModelSpec& spec, const std::string& key) {
    const auto it = spec.params.find(key);
    if (it == spec.params.end())
        throw InvalidArgument(std::string(to_string(spec.family)) + " spec has no hyperparameter '" + key + "'");
    return it->second;
}

ModelSpec make(ModelFamily f, Task t, Hyperparameters p) { return ModelSpec{f, t, std::move(p)}; }

} // namespace

std::string_view to_string(ModelFamily family) {
    for (const auto& [f, name] : kFamilyNames)
        if (f == family) return name;
    return "unknown";
}

ModelFamily parse_family(std::string_view text) {
    for (const auto& [f, name] : kFamilyNames)
        if (name == text) return f;
    throw InvalidArgument("unknown model family '" + std::string(text) + "'");
}

std::string ModelSpec::label() const {
    std::string out(to_string(family));
    out += '(';
    bool first = true;
    for (const auto& [k, v] : params) {
        if (k == "seed") continue;
        if (!first) out += ',';
        first = false;
        out += k + '=' + format_param(v);
    }
    out += ')';
    return out;
}

std::int64_t ModelSpec::get_int(const std::string& key) const {
    const auto& v = lookup(*this, key);
    if (const auto* p = std::get_if<std::int64_t>(&v)) return *p;
    throw InvalidArgument("hyperparameter '" + key + "' is not an integer");
}

double ModelSpec::get_double(const std::string& key) const {
    const auto& v = lookup(*this, key);
    if (const auto* p = std::get_if<double>(&v)) return *p;
    if (const auto* p = std::get_if<std::int64_t>(&v)) return static_cast<double>(*p);
    throw InvalidArgument("hyperparameter '" + key + "' is not a number");
}

const std::string& ModelSpec::get_string(const std::string& key) const {
    const auto& v = lookup(*this, key);
    if (const auto* p = std::get_if<std::string>(&v)) return *p;
    throw InvalidArgument("hyperparameter '" + key + "' is not a string");
}

bool ModelSpec::get_bool(const std::string& key) const {
    const auto& v = lookup(*this, key);
    if (const auto* p = std::get_if<bool>(&v)) return *p;
    throw InvalidArgument("hyperparameter '" + key + "' is not a boolean");
}

std::uint64_t ModelSpec::seed() const {
    const auto it = params.find("seed");
    if (it == params.end()) return 0;
    if (const auto* p = std::get_if<std::int64_t>(&it->second)) return static_cast<std::uint64_t>(*p);
    throw InvalidArgument("hyperparameter 'seed' is not an integer");
}

nlohmann::json to_json(const Hyperparameters& params) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : params) std::visit([&](const auto& x) { out[k] = x; }, v);
    return out;
}

Hyperparameters hyperparameters_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("hyperparameters must be a JSON object");
    Hyperparameters out;
    for (const auto& [k, v] : doc.items()) {
        if (v.is_boolean())
            out[k] = v.get<bool>();
        else if (v.is_number_integer())
            out[k] = v.get<std::int64_t>();
        else if (v.is_number_float())
            out[k] = v.get<double>();
        else if (v.is_string())
            out[k] = v.get<std::string>();
        else
            throw ParseError("hyperparameter '" + k + "' has an unsupported type");
    }
    return out;
}

std::vector<ModelSpec> enumerate_model_grid(Task task, std::uint64_t seed) {
    const bool cls = task == Task::Classification;
    const auto s = static_cast<std::int64_t>(seed);
    std::vector<ModelSpec> grid;
    using F = ModelFamily;

    for (std::int64_t k : {1, 3, 5, 7, 9, 15})
        for (const char* w : {"uniform", "distance"})
            for (const char* m : {"euclidean", "manhattan"})
                grid.push_back(make(F::Knn, task,
                                    {{"n_neighbors", k}, {"weights", std::string(w)}, {"metric", std::string(m)}}));

    const std::vector<std::string> criteria =
        cls ? std::vector<std::string>{"gini", "entropy"} : std::vector<std::string>{"squared_error", "absolute_error"};
    for (const auto& c : criteria)
        for (std::int64_t d : {0, 4, 8, 16})
            grid.push_back(make(F::DecisionTree, task, {{"criterion", c}, {"max_depth", d}, {"seed", s}}));

    const std::string max_features = cls ? "sqrt" : "third";
    for (std::int64_t n : {10, 50, 100, 200})
        for (bool b : {true, false})
            grid.push_back(make(F::RandomForest, task,
                                {{"n_estimators", n}, {"bootstrap", b}, {"max_features", max_features}, {"seed", s}}));

    for (std::int64_t n : {10, 50, 100, 200})
        grid.push_back(make(F::Bagging, task, {{"n_estimators", n}, {"seed", s}}));

    for (std::int64_t n : {10, 50, 100, 200})
        grid.push_back(make(F::AdaBoost, task,
                            {{"n_estimators", n}, {"learning_rate", 1.0}, {"max_depth", std::int64_t{cls ? 1 : 3}},
                             {"seed", s}}));

    const std::vector<std::string> losses = cls ? std::vector<std::string>{"log_loss", "exponential"}
                                                : std::vector<std::string>{"squared_error", "absolute_error"};
    for (std::int64_t n : {10, 50, 100, 200})
        for (const auto& l : losses)
            grid.push_back(make(F::GradientBoosting, task,
                                {{"n_estimators", n}, {"loss", l}, {"learning_rate", 0.1}, {"max_depth", std::int64_t{3}},
                                 {"seed", s}}));

    if (cls) {
        grid.push_back(make(F::GaussianNb, task, {{"var_smoothing", 1e-9}}));
        grid.push_back(make(F::BernoulliNb, task, {{"alpha", 1.0}, {"binarize", 0.5}}));
    } else {
        grid.push_back(make(F::GaussianNb, task, {{"var_smoothing", 1e-9}, {"n_bins", std::int64_t{10}}}));
    }

    for (double a : {0.01, 0.1, 1.0, 10.0}) grid.push_back(make(F::Linear, task, {{"alpha", a}}));

    for (double c : {0.1, 1.0, 10.0, 100.0})
        grid.push_back(make(F::SvmLinear, task, {{"C", c}, {"epochs", std::int64_t{30}}, {"seed", s}}));

    return grid;
}

std::vector<ModelSpec> cap_model_grid(const std::vector<ModelSpec>& grid, std::size_t max_models) {
    if (grid.size() <= max_models) return grid;
    std::vector<std::vector<const ModelSpec*>> by_family;
    std::vector<ModelFamily> order;
    for (const auto& spec : grid) {
        auto it = std::find(order.begin(), order.end(), spec.family);
        if (it == order.end()) {
            order.push_back(spec.family);
            by_family.emplace_back();
            it = order.end() - 1;
        }
        by_family[static_cast<std::size_t>(it - order.begin())].push_back(&spec);
    }
    std::vector<ModelSpec> out;
    for (std::size_t round = 0; out.size() < max_models; ++round)
        for (const auto& fam : by_family)
            if (round < fam.size() && out.size() < max_models) out.push_back(*fam[round]);
    return out;
}

TrainedModel::TrainedModel(ModelSpec spec, std::shared_ptr<const detail::Estimator> impl, Eigen::Index feature_dim,
                           int num_classes)
    : spec_(std::move(spec)), impl_(std::move(impl)), feature_dim_(feature_dim), num_classes_(num_classes) {}

Prediction TrainedModel::predict(const Matrix& X) const {
    if (X.cols() != feature_dim_)
        throw InvalidArgument("model expects " + std::to_string(feature_dim_) + " features, got " +
                              std::to_string(X.cols()));
    if (X.rows() == 0) {
        Prediction p;
        p.scores = Matrix(0, num_classes_);
        return p;
    }
    return impl_->predict(X);
}

nlohmann::json TrainedModel::parameters() const {
    return {{"feature_dim", feature_dim_}, {"num_classes", num_classes_}, {"estimator", impl_->to_json()}};
}

TrainedModel TrainedModel::from_parameters(const ModelSpec& spec, const nlohmann::json& parameters) {
    try {
        const auto dim = parameters.at("feature_dim").get<Eigen::Index>();
        const int k = parameters.at("num_classes").get<int>();
        const auto& doc = parameters.at("estimator");
        detail::EstimatorPtr impl;
        switch (spec.family) {
        case ModelFamily::Knn: impl = detail::knn_from_json(spec, doc); break;
        case ModelFamily::DecisionTree:
        case ModelFamily::RandomForest:
        case ModelFamily::Bagging: impl = detail::tree_ensemble_from_json(spec, doc); break;
        case ModelFamily::AdaBoost: impl = detail::adaboost_from_json(spec, doc); break;
        case ModelFamily::GradientBoosting: impl = detail::gradient_boosting_from_json(spec, doc); break;
        case ModelFamily::GaussianNb:
        case ModelFamily::BernoulliNb: impl = detail::naive_bayes_from_json(spec, doc); break;
        case ModelFamily::Linear:
        case ModelFamily::SvmLinear: impl = detail::linear_from_json(spec, doc); break;
        }
        return TrainedModel(spec, std::move(impl), dim, k);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad parameters for ") + std::string(to_string(spec.family)) + ": " + e.what());
    }
}

TrainedModel train_model(const ModelSpec& spec, const Matrix& X, std::span<const double> y, int num_classes) {
    if (static_cast<std::size_t>(X.rows()) != y.size())
        throw InvalidArgument("feature rows (" + std::to_string(X.rows()) + ") and targets (" +
                              std::to_string(y.size()) + ") differ");
    if (X.rows() == 0 || X.cols() == 0) throw DegenerateData("degenerate training data: empty feature matrix");
    if (!X.allFinite()) throw InvalidArgument("feature matrix contains non-finite values");
    for (double v : y)
        if (!std::isfinite(v)) throw InvalidArgument("targets contain non-finite values");

    if (spec.task == Task::Classification) {
        int max_id = -1;
        for (double v : y) {
            if (v < 0 || v != std::floor(v)) throw InvalidArgument("class ids must be non-negative integers");
            max_id = std::max(max_id, static_cast<int>(v));
        }
        if (num_classes <= 0) num_classes = max_id + 1;
        if (max_id >= num_classes) throw InvalidArgument("class id exceeds num_classes");
        if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); }))
            throw DegenerateData("degenerate training data: single class");
    } else {
        num_classes = 0;
        if (spec.family == ModelFamily::BernoulliNb)
            throw InvalidArgument("bernoulli_nb is classification-only");
    }

    const detail::FitData data{X, y, spec.task, num_classes};
    detail::EstimatorPtr impl;
    switch (spec.family) {
    case ModelFamily::Knn: impl = detail::fit_knn(spec, data); break;
    case ModelFamily::DecisionTree: impl = detail::fit_decision_tree(spec, data); break;
    case ModelFamily::RandomForest: impl = detail::fit_random_forest(spec, data); break;
    case ModelFamily::Bagging: impl = detail::fit_bagging(spec, data); break;
    case ModelFamily::AdaBoost: impl = detail::fit_adaboost(spec, data); break;
    case ModelFamily::GradientBoosting: impl = detail::fit_gradient_boosting(spec, data); break;
    case ModelFamily::GaussianNb: impl = detail::fit_gaussian_nb(spec, data); break;
    case ModelFamily::BernoulliNb: impl = detail::fit_bernoulli_nb(spec, data); break;
    case ModelFamily::Linear: impl = detail::fit_linear(spec, data); break;
    case ModelFamily::SvmLinear: impl = detail::fit_svm_linear(spec, data); break;
    }
    return TrainedModel(spec, std::move(impl), X.cols(), num_classes);
}

namespace detail {

Prediction finalize_classification(Matrix scores) {
    Prediction p;
    p.values.resize(static_cast<std::size_t>(scores.rows()));
    const auto k = scores.cols();
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        auto row = scores.row(i);
        for (Eigen::Index c = 0; c < k; ++c)
            if (!(row(c) > 0.0)) row(c) = 0.0;
        const double s = row.sum();
        if (s > 0.0)
            row /= s;
        else
            row.setConstant(1.0 / static_cast<double>(k));
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < k; ++c)
            if (row(c) > row(best)) best = c;
        p.values[static_cast<std::size_t>(i)] = static_cast<double>(best);
    }
    p.scores = std::move(scores);
    return p;
}

Prediction regression_prediction(std::vector<double> values) {
    Prediction p;
    p.values = std::move(values);
    return p;
}

nlohmann::json matrix_to_json(const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::json& doc) {
    const auto r = doc.at("rows").get<Eigen::Index>();
    const auto c = doc.at("cols").get<Eigen::Index>();
    const auto data = doc.at("data").get<std::vector<double>>();
    if (r < 0 || c < 0 || data.size() != static_cast<std::size_t>(r * c))
        throw ParseError("matrix payload size does not match its shape");
    Matrix m(r, c);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& doc) {
    const auto data = doc.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

} // namespace detail
} // namespace propspec
