#include "propspec/cross_validation.hpp"

#include <algorithm>
#include <set>

#include "propspec/dataset.hpp"
#include "propspec/error.hpp"
#include "propspec/log.hpp"
#include "propspec/random.hpp"

namespace propspec {

Matrix select_rows(const Matrix& X, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

std::vector<double> select(std::span<const double> v, std::span<const std::size_t> rows) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
    return out;
}

std::vector<Fold> kfold_indices(std::span<const double> y, Task task, int k, std::uint64_t seed) {
    const std::size_t n = y.size();
    if (k < 2 || static_cast<std::size_t>(k) > n)
        throw InvalidArgument("k-fold needs 2 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    Rng rng(seed);
    std::vector<std::size_t> order;
    if (task == Task::Classification) {
        std::set<double> classes(y.begin(), y.end());
        for (double c : classes) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i)
                if (y[i] == c) members.push_back(i);
            rng.shuffle(std::span<std::size_t>(members));
            order.insert(order.end(), members.begin(), members.end());
        }
    } else {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(std::span<std::size_t>(order));
    }
    std::vector<int> fold_of(n);
    for (std::size_t p = 0; p < n; ++p) fold_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(k));
    std::vector<Fold> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i)
        for (int f = 0; f < k; ++f) (fold_of[i] == f ? folds[static_cast<std::size_t>(f)].test : folds[static_cast<std::size_t>(f)].train).push_back(i);
    return folds;
}

CvResult kfold_cv(const ModelSpec& spec, const Matrix& X, std::span<const double> y, int num_classes,
                  const std::vector<Fold>& folds, const std::string& primary_metric) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw InvalidArgument("feature rows and targets differ");
    validate_primary_metric(spec.task, primary_metric);
    const bool cls = spec.task == Task::Classification;
    if (cls && num_classes <= 0)
        num_classes = static_cast<int>(*std::max_element(y.begin(), y.end())) + 1;

    CvResult r;
    r.primary_metric = primary_metric;
    r.oof_values.assign(y.size(), 0.0);
    if (cls) r.oof_scores = Matrix::Zero(static_cast<Eigen::Index>(y.size()), num_classes);

    for (const auto& fold : folds) {
        const Matrix Xtr = select_rows(X, fold.train);
        const auto scaler = fit_minmax(Xtr);
        const auto model = train_model(spec, apply_minmax(scaler, Xtr), select(y, fold.train), num_classes);
        const auto pred = model.predict(apply_minmax(scaler, select_rows(X, fold.test)));
        for (std::size_t j = 0; j < fold.test.size(); ++j) {
            const auto i = fold.test[j];
            r.oof_values[i] = pred.values[j];
            if (cls) r.oof_scores.row(static_cast<Eigen::Index>(i)) = pred.scores.row(static_cast<Eigen::Index>(j));
        }
        const auto truth = select(y, fold.test);
        if (cls) {
            r.folds.push_back(classification_metrics(truth, pred.values, num_classes));
            r.flagged.push_back(std::all_of(truth.begin(), truth.end(), [&](double v) { return v == truth.front(); }));
        } else {
            try {
                r.folds.push_back(regression_metrics(truth, pred.values));
                r.flagged.push_back(false);
            } catch (const Error&) {
                r.folds.push_back(MetricsReport{spec.task, {}, {"undefined"}});
                r.flagged.push_back(true);
            }
        }
    }

    const auto used = static_cast<std::size_t>(std::count(r.flagged.begin(), r.flagged.end(), false));
    if (used < folds.size())
        logger()->warn("{}: {} of {} folds flagged and excluded from the mean", spec.label(), folds.size() - used,
                       folds.size());
    if (used > 0) {
        for (const auto& name : metric_names(spec.task)) {
            double s = 0;
            for (std::size_t f = 0; f < folds.size(); ++f)
                if (!r.flagged[f]) s += r.folds[f].at(name);
            r.mean[name] = s / static_cast<double>(used);
        }
    } else if (cls) {
        for (const auto& name : metric_names(spec.task)) {
            double s = 0;
            for (const auto& m : r.folds) s += m.at(name);
            r.mean[name] = s / static_cast<double>(folds.size());
        }
    } else {
        // every fold too small for correlations: score the pooled predictions
        r.mean = regression_metrics(y, r.oof_values).values;
    }
    r.primary = r.mean.at(primary_metric);
    return r;
}

CvResult kfold_cv(const ModelSpec& spec, const Matrix& X, std::span<const double> y, int num_classes, int k,
                  std::uint64_t seed, const std::string& primary_metric) {
    return kfold_cv(spec, X, y, num_classes, kfold_indices(y, spec.task, k, seed), primary_metric);
}

} // namespace propspec
