#include "propspec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "propspec/error.hpp"
#include "propspec/stats.hpp"

namespace propspec {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, std::size_t min_len) {
    if (a.size() != b.size())
        throw InvalidArgument("metric inputs differ in length (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    if (a.size() < min_len) throw InvalidArgument("metric inputs need at least " + std::to_string(min_len) + " values");
}

double ratio(double num, double den, const char* flag, std::vector<std::string>& flags) {
    if (den == 0.0) {
        if (std::find(flags.begin(), flags.end(), flag) == flags.end()) flags.emplace_back(flag);
        return 0.0;
    }
    return num / den;
}

struct Prf {
    double precision, recall, f;
};

Prf class_prf(std::span<const double> t, std::span<const double> p, double cls, std::vector<std::string>& flags) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const bool pt = t[i] == cls, pp = p[i] == cls;
        tp += pt && pp;
        fp += !pt && pp;
        fn += pt && !pp;
    }
    const double prec = ratio(tp, tp + fp, "precision_zero_division", flags);
    const double rec = ratio(tp, tp + fn, "recall_zero_division", flags);
    const double f = ratio(2 * prec * rec, prec + rec, "f_score_zero_division", flags);
    return {prec, rec, f};
}

} // namespace

double MetricsReport::at(const std::string& name) const {
    const auto it = values.find(name);
    if (it == values.end()) throw InvalidArgument("metrics report has no '" + name + "'");
    return it->second;
}

MetricsReport classification_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                                     std::optional<int> positive_class) {
    check_lengths(y_true, y_pred, 1);
    MetricsReport r;
    r.task = Task::Classification;
    double correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i];
    r.values["accuracy"] = correct / static_cast<double>(y_true.size());

    if (positive_class) {
        const auto prf = class_prf(y_true, y_pred, *positive_class, r.flags);
        r.values["precision"] = prf.precision;
        r.values["recall"] = prf.recall;
        r.values["f_score"] = prf.f;
        return r;
    }
    std::set<double> labels(y_true.begin(), y_true.end());
    labels.insert(y_pred.begin(), y_pred.end());
    double sp = 0, sr = 0, sf = 0;
    for (double c : labels) {
        const auto prf = class_prf(y_true, y_pred, c, r.flags);
        sp += prf.precision;
        sr += prf.recall;
        sf += prf.f;
    }
    const auto k = static_cast<double>(labels.size());
    r.values["precision"] = sp / k;
    r.values["recall"] = sr / k;
    r.values["f_score"] = sf / k;
    return r;
}

MetricsReport classification_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                                     int num_classes) {
    return classification_metrics(y_true, y_pred, num_classes <= 2 ? std::optional<int>(1) : std::nullopt);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y, 2);
    const double mx = stats::mean(x), my = stats::mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nan("");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kendall_tau_a(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y, 2);
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double a = x[i] - x[j], b = y[i] - y[j];
            if (a * b > 0) s += 1;
            else if (a * b < 0) s -= 1;
        }
    const auto n = static_cast<double>(x.size());
    return s / (n * (n - 1) / 2);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = stats::average_ranks(x), ry = stats::average_ranks(y);
    return pearson(rx, ry);
}

MetricsReport regression_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    check_lengths(y_true, y_pred, 2);
    if (std::all_of(y_true.begin(), y_true.end(), [&](double v) { return v == y_true.front(); }))
        throw DegenerateData("degenerate target: y_true is constant");
    MetricsReport r;
    r.task = Task::Regression;
    const bool constant_pred =
        std::all_of(y_pred.begin(), y_pred.end(), [&](double v) { return v == y_pred.front(); });
    if (constant_pred) {
        r.flags.emplace_back("constant_prediction");
        r.values["pearson"] = 0.0;
        r.values["spearman"] = 0.0;
    } else {
        r.values["pearson"] = pearson(y_true, y_pred);
        r.values["spearman"] = spearman(y_true, y_pred);
    }
    r.values["kendall_tau"] = kendall_tau_a(y_true, y_pred);

    const double mu = stats::mean(y_true);
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
        ss_tot += (y_true[i] - mu) * (y_true[i] - mu);
    }
    r.values["r_score"] = 1.0 - ss_res / ss_tot;
    r.values["rmse"] = std::sqrt(ss_res / static_cast<double>(y_true.size()));
    return r;
}

std::string default_primary_metric(Task task) { return task == Task::Classification ? "f_score" : "pearson"; }

std::vector<std::string> metric_names(Task task) {
    if (task == Task::Classification) return {"accuracy", "precision", "recall", "f_score"};
    return {"pearson", "kendall_tau", "spearman", "r_score", "rmse"};
}

void validate_primary_metric(Task task, const std::string& name) {
    const auto names = metric_names(task);
    if (name == "rmse" || std::find(names.begin(), names.end(), name) == names.end())
        throw InvalidArgument("'" + name + "' is not a selectable " + std::string(to_string(task)) +
                              " metric (must be higher-is-better)");
}

} // namespace propspec
