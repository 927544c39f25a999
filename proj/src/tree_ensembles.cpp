#include <algorithm>
#include <cmath>
#include <optional>

#include "estimator.hpp"
#include "propspec/error.hpp"
#include "tree.hpp"

namespace propspec::detail {
namespace {

/// Averages leaf values over trees; a single tree is the decision tree case.
class TreeEnsemble final : public Estimator {
public:
    TreeEnsemble(std::vector<Tree> trees, int num_classes) : trees_(std::move(trees)), num_classes_(num_classes) {}

    Prediction predict(const Matrix& X) const override {
        const int outputs = std::max(num_classes_, 1);
        Matrix acc = Matrix::Zero(X.rows(), outputs);
        for (const auto& tree : trees_)
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const auto v = tree.leaf_value(tree.apply(X.row(i).data()));
                for (int c = 0; c < outputs; ++c) acc(i, c) += v[static_cast<std::size_t>(c)];
            }
        acc /= static_cast<double>(trees_.size());
        if (num_classes_ > 0) return finalize_classification(std::move(acc));
        return regression_prediction(std::vector<double>(acc.data(), acc.data() + acc.rows()));
    }

    nlohmann::json to_json() const override {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : trees_) trees.push_back(t.to_json());
        return {{"num_classes", num_classes_}, {"trees", trees}};
    }

private:
    std::vector<Tree> trees_;
    int num_classes_;
};

SplitCriterion default_criterion(const FitData& data) {
    return data.task == Task::Classification ? SplitCriterion::Gini : SplitCriterion::SquaredError;
}

void check_criterion(SplitCriterion c, Task task) {
    const bool cls = c == SplitCriterion::Gini || c == SplitCriterion::Entropy;
    if (cls != (task == Task::Classification))
        throw InvalidArgument("split criterion does not match the task");
}

int resolve_max_features(const ModelSpec& spec, Eigen::Index d) {
    const auto it = spec.params.find("max_features");
    if (it == spec.params.end()) return 0;
    const auto& mode = spec.get_string("max_features");
    const auto dd = static_cast<double>(d);
    if (mode == "sqrt") return std::max(1, static_cast<int>(std::floor(std::sqrt(dd))));
    if (mode == "third") return std::max(1, static_cast<int>(d / 3));
    if (mode == "all") return 0;
    throw InvalidArgument("max_features must be sqrt, third or all");
}

int optional_depth(const ModelSpec& spec) {
    if (!spec.params.contains("max_depth")) return 0;
    const auto d = spec.get_int("max_depth");
    if (d < 0) throw InvalidArgument("max_depth must be >= 0 (0 = unlimited)");
    return static_cast<int>(d);
}

EstimatorPtr fit_forest(const FitData& data, const TreeParams& params, int n_trees, bool bootstrap,
                        std::uint64_t seed) {
    if (n_trees < 1) throw InvalidArgument("n_estimators must be >= 1");
    const auto n = static_cast<std::size_t>(data.X.rows());
    Rng master(seed);
    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(n_trees));
    std::vector<double> w(n);
    std::optional<ColumnOrder> order;
    if (n_trees > 1) order.emplace(data.X);
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(master.split());
        if (bootstrap) {
            std::fill(w.begin(), w.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) w[rng.index(n)] += 1.0;
        } else {
            std::fill(w.begin(), w.end(), 1.0);
        }
        trees.push_back(build_tree(data.X, data.y, w, data.num_classes, params, rng, order ? &*order : nullptr));
    }
    return std::make_unique<TreeEnsemble>(std::move(trees), data.num_classes);
}

} // namespace

EstimatorPtr fit_decision_tree(const ModelSpec& spec, const FitData& data) {
    TreeParams p;
    p.criterion = spec.params.contains("criterion") ? parse_criterion(spec.get_string("criterion"))
                                                    : default_criterion(data);
    check_criterion(p.criterion, data.task);
    p.max_depth = optional_depth(spec);
    p.max_features = resolve_max_features(spec, data.X.cols());
    return fit_forest(data, p, 1, false, spec.seed());
}

EstimatorPtr fit_random_forest(const ModelSpec& spec, const FitData& data) {
    TreeParams p;
    p.criterion = default_criterion(data);
    p.max_depth = optional_depth(spec);
    p.max_features = resolve_max_features(spec, data.X.cols());
    return fit_forest(data, p, static_cast<int>(spec.get_int("n_estimators")), spec.get_bool("bootstrap"),
                      spec.seed());
}

EstimatorPtr fit_bagging(const ModelSpec& spec, const FitData& data) {
    TreeParams p;
    p.criterion = default_criterion(data);
    return fit_forest(data, p, static_cast<int>(spec.get_int("n_estimators")), true, spec.seed());
}

EstimatorPtr tree_ensemble_from_json(const ModelSpec&, const nlohmann::json& doc) {
    std::vector<Tree> trees;
    for (const auto& t : doc.at("trees")) trees.push_back(Tree::from_json(t));
    if (trees.empty()) throw ParseError("tree ensemble has no trees");
    return std::make_unique<TreeEnsemble>(std::move(trees), doc.at("num_classes").get<int>());
}

} // namespace propspec::detail
