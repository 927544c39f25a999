#include <algorithm>
#include <cmath>
#include <numeric>

#include "estimator.hpp"
#include "propspec/error.hpp"
#include "tree.hpp"

namespace propspec::detail {
namespace {

nlohmann::json trees_to_json(const std::vector<Tree>& trees) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : trees) out.push_back(t.to_json());
    return out;
}

std::vector<Tree> trees_from_json(const nlohmann::json& doc) {
    std::vector<Tree> out;
    for (const auto& t : doc) out.push_back(Tree::from_json(t));
    if (out.empty()) throw ParseError("boosted model has no trees");
    return out;
}

double weighted_median(std::vector<std::pair<double, double>> vw) {
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& p : vw) total += p.second;
    double acc = 0.0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= 0.5 * total) return p.first;
    }
    return vw.back().first;
}

double median(std::vector<double> v) {
    std::vector<std::pair<double, double>> vw;
    for (double x : v) vw.emplace_back(x, 1.0);
    return weighted_median(std::move(vw));
}

double predict_scalar(const Tree& t, const double* row) { return t.leaf_value(t.apply(row))[0]; }

// AdaBoost -------------------------------------------------------------------

class AdaBoost final : public Estimator {
public:
    AdaBoost(std::vector<Tree> trees, std::vector<double> alphas, int num_classes)
        : trees_(std::move(trees)), alphas_(std::move(alphas)), num_classes_(num_classes) {}

    Prediction predict(const Matrix& X) const override {
        if (num_classes_ > 0) {
            Matrix votes = Matrix::Zero(X.rows(), num_classes_);
            for (std::size_t m = 0; m < trees_.size(); ++m)
                for (Eigen::Index i = 0; i < X.rows(); ++i) {
                    const auto v = trees_[m].leaf_value(trees_[m].apply(X.row(i).data()));
                    const auto c = std::max_element(v.begin(), v.end()) - v.begin();
                    votes(i, c) += alphas_[m];
                }
            return finalize_classification(std::move(votes));
        }
        // R2: weighted median over estimators
        std::vector<double> out(static_cast<std::size_t>(X.rows()));
        std::vector<std::pair<double, double>> vw(trees_.size());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            for (std::size_t m = 0; m < trees_.size(); ++m)
                vw[m] = {predict_scalar(trees_[m], X.row(i).data()), alphas_[m]};
            out[static_cast<std::size_t>(i)] = weighted_median(vw);
        }
        return regression_prediction(std::move(out));
    }

    nlohmann::json to_json() const override {
        return {{"num_classes", num_classes_}, {"alphas", alphas_}, {"trees", trees_to_json(trees_)}};
    }

private:
    std::vector<Tree> trees_;
    std::vector<double> alphas_;
    int num_classes_;
};

EstimatorPtr fit_samme(const FitData& data, int n_estimators, double lr, const TreeParams& params, Rng& rng) {
    const auto n = static_cast<std::size_t>(data.X.rows());
    const int k = data.num_classes;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<Tree> trees;
    std::vector<double> alphas;
    std::vector<char> miss(n);
    const ColumnOrder order(data.X);
    for (int m = 0; m < n_estimators; ++m) {
        Tree t = build_tree(data.X, data.y, w, k, params, rng, &order);
        double err = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = t.leaf_value(t.apply(data.X.row(static_cast<Eigen::Index>(i)).data()));
            const auto pred = std::max_element(v.begin(), v.end()) - v.begin();
            miss[i] = static_cast<double>(pred) != data.y[i];
            total += w[i];
            if (miss[i]) err += w[i];
        }
        err /= total;
        if (err <= 0.0) {
            trees.push_back(std::move(t));
            alphas.push_back(1.0);
            break;
        }
        if (err >= 1.0 - 1.0 / k) {
            if (trees.empty()) {
                trees.push_back(std::move(t));
                alphas.push_back(1.0);
            }
            break;
        }
        const double alpha = lr * (std::log((1.0 - err) / err) + std::log(k - 1.0));
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (miss[i]) w[i] *= std::exp(alpha);
            s += w[i];
        }
        for (double& x : w) x /= s;
        trees.push_back(std::move(t));
        alphas.push_back(alpha);
    }
    return std::make_unique<AdaBoost>(std::move(trees), std::move(alphas), k);
}

EstimatorPtr fit_r2(const FitData& data, int n_estimators, double lr, const TreeParams& params, Rng& rng) {
    const auto n = static_cast<std::size_t>(data.X.rows());
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> cdf(n), counts(n), err(n);
    std::vector<Tree> trees;
    std::vector<double> alphas;
    const ColumnOrder order(data.X);
    for (int m = 0; m < n_estimators; ++m) {
        std::partial_sum(w.begin(), w.end(), cdf.begin());
        std::fill(counts.begin(), counts.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double u = rng.uniform() * cdf.back();
            auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            counts[std::min(idx, n - 1)] += 1.0;
        }
        Tree t = build_tree(data.X, data.y, counts, 0, params, rng, &order);
        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err[i] = std::abs(predict_scalar(t, data.X.row(static_cast<Eigen::Index>(i)).data()) - data.y[i]);
            max_err = std::max(max_err, err[i]);
        }
        if (max_err <= 0.0) {
            trees.push_back(std::move(t));
            alphas.push_back(1.0);
            break;
        }
        double avg = 0.0;
        for (std::size_t i = 0; i < n; ++i) avg += w[i] * err[i] / max_err;
        if (avg >= 0.5) {
            if (trees.empty()) {
                trees.push_back(std::move(t));
                alphas.push_back(1.0);
            }
            break;
        }
        const double beta = avg / (1.0 - avg);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::pow(beta, (1.0 - err[i] / max_err) * lr);
            s += w[i];
        }
        for (double& x : w) x /= s;
        trees.push_back(std::move(t));
        alphas.push_back(lr * std::log(1.0 / std::max(beta, 1e-300)));
    }
    return std::make_unique<AdaBoost>(std::move(trees), std::move(alphas), 0);
}

// Gradient boosting ----------------------------------------------------------

enum class Loss { LogLoss, Exponential, SquaredError, AbsoluteError };

Loss parse_loss(std::string_view s, Task task) {
    const bool cls = task == Task::Classification;
    if (cls && s == "log_loss") return Loss::LogLoss;
    if (cls && s == "exponential") return Loss::Exponential;
    if (!cls && s == "squared_error") return Loss::SquaredError;
    if (!cls && s == "absolute_error") return Loss::AbsoluteError;
    throw InvalidArgument("loss '" + std::string(s) + "' is not valid for " + std::string(to_string(task)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void softmax_row(Eigen::Ref<Eigen::RowVectorXd> row) {
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
}

/// Raw scores have one column per tree in a stage (K for multiclass log
/// loss, otherwise 1).
class GradientBoosting final : public Estimator {
public:
    GradientBoosting(Loss loss, int num_classes, double lr, std::vector<double> init, std::vector<Tree> trees)
        : loss_(loss), num_classes_(num_classes), lr_(lr), init_(std::move(init)), trees_(std::move(trees)) {}

    Matrix raw(const Matrix& X) const {
        const auto cols = static_cast<Eigen::Index>(init_.size());
        Matrix F(X.rows(), cols);
        for (Eigen::Index c = 0; c < cols; ++c) F.col(c).setConstant(init_[static_cast<std::size_t>(c)]);
        for (std::size_t t = 0; t < trees_.size(); ++t) {
            const auto c = static_cast<Eigen::Index>(t % init_.size());
            for (Eigen::Index i = 0; i < X.rows(); ++i) F(i, c) += lr_ * predict_scalar(trees_[t], X.row(i).data());
        }
        return F;
    }

    Prediction predict(const Matrix& X) const override {
        Matrix F = raw(X);
        switch (loss_) {
        case Loss::SquaredError:
        case Loss::AbsoluteError: return regression_prediction(std::vector<double>(F.data(), F.data() + F.rows()));
        case Loss::LogLoss:
            if (num_classes_ > 2) {
                for (Eigen::Index i = 0; i < F.rows(); ++i) softmax_row(F.row(i));
                return finalize_classification(std::move(F));
            }
            [[fallthrough]];
        case Loss::Exponential: {
            const double scale = loss_ == Loss::Exponential ? 2.0 : 1.0;
            Matrix P(F.rows(), 2);
            for (Eigen::Index i = 0; i < F.rows(); ++i) {
                const double p1 = sigmoid(scale * F(i, 0));
                P(i, 0) = 1.0 - p1;
                P(i, 1) = p1;
            }
            return finalize_classification(std::move(P));
        }
        }
        throw InvariantViolation("unreachable loss");
    }

    nlohmann::json to_json() const override {
        static constexpr const char* names[] = {"log_loss", "exponential", "squared_error", "absolute_error"};
        return {{"loss", names[static_cast<int>(loss_)]},
                {"num_classes", num_classes_},
                {"learning_rate", lr_},
                {"init", init_},
                {"trees", trees_to_json(trees_)}};
    }

private:
    Loss loss_;
    int num_classes_;
    double lr_;
    std::vector<double> init_;
    std::vector<Tree> trees_;
};

/// Replaces each leaf value of `t` with `leaf_fn(rows in that leaf)`.
template <typename Fn>
void refit_leaves(Tree& t, const Matrix& X, Fn leaf_fn) {
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(t.node_count()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        members[static_cast<std::size_t>(t.apply(X.row(i).data()))].push_back(static_cast<std::size_t>(i));
    for (int node = 0; node < t.node_count(); ++node) {
        if (!t.is_leaf(node) || members[static_cast<std::size_t>(node)].empty()) continue;
        const double v = leaf_fn(members[static_cast<std::size_t>(node)]);
        t.set_leaf_value(node, std::span<const double>(&v, 1));
    }
}

double safe_ratio(double num, double den) { return std::abs(den) < 1e-150 ? 0.0 : num / den; }

} // namespace

EstimatorPtr fit_adaboost(const ModelSpec& spec, const FitData& data) {
    const auto n_est = static_cast<int>(spec.get_int("n_estimators"));
    if (n_est < 1) throw InvalidArgument("n_estimators must be >= 1");
    const double lr = spec.get_double("learning_rate");
    if (!(lr > 0.0)) throw InvalidArgument("learning_rate must be positive");
    TreeParams p;
    p.max_depth = static_cast<int>(spec.get_int("max_depth"));
    Rng rng(spec.seed());
    if (data.task == Task::Classification) {
        p.criterion = SplitCriterion::Gini;
        return fit_samme(data, n_est, lr, p, rng);
    }
    p.criterion = SplitCriterion::SquaredError;
    return fit_r2(data, n_est, lr, p, rng);
}

EstimatorPtr adaboost_from_json(const ModelSpec&, const nlohmann::json& doc) {
    auto trees = trees_from_json(doc.at("trees"));
    auto alphas = doc.at("alphas").get<std::vector<double>>();
    if (alphas.size() != trees.size()) throw ParseError("adaboost weights and trees differ in count");
    return std::make_unique<AdaBoost>(std::move(trees), std::move(alphas), doc.at("num_classes").get<int>());
}

EstimatorPtr fit_gradient_boosting(const ModelSpec& spec, const FitData& data) {
    const auto n_est = static_cast<int>(spec.get_int("n_estimators"));
    if (n_est < 1) throw InvalidArgument("n_estimators must be >= 1");
    const double lr = spec.get_double("learning_rate");
    if (!(lr > 0.0)) throw InvalidArgument("learning_rate must be positive");
    const Loss loss = parse_loss(spec.get_string("loss"), data.task);
    const int k = data.num_classes;
    if (loss == Loss::Exponential && k != 2) throw InvalidArgument("exponential loss requires exactly two classes");

    TreeParams p;
    p.criterion = SplitCriterion::SquaredError;
    p.max_depth = static_cast<int>(spec.get_int("max_depth"));
    Rng rng(spec.seed());

    const Matrix& X = data.X;
    const auto y = data.y;
    const auto n = static_cast<std::size_t>(X.rows());
    const int stage_trees = (loss == Loss::LogLoss && k > 2) ? k : 1;

    std::vector<double> init(static_cast<std::size_t>(stage_trees));
    if (loss == Loss::SquaredError) {
        init[0] = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    } else if (loss == Loss::AbsoluteError) {
        init[0] = median(std::vector<double>(y.begin(), y.end()));
    } else {
        std::vector<double> prior(static_cast<std::size_t>(std::max(k, 2)), 0.0);
        for (double v : y) prior[static_cast<std::size_t>(v)] += 1.0 / static_cast<double>(n);
        if (stage_trees > 1) {
            for (int c = 0; c < k; ++c) init[static_cast<std::size_t>(c)] = std::log(std::max(prior[static_cast<std::size_t>(c)], 1e-12));
        } else {
            const double p1 = std::clamp(prior[1], 1e-12, 1.0 - 1e-12);
            init[0] = std::log(p1 / (1.0 - p1)) * (loss == Loss::Exponential ? 0.5 : 1.0);
        }
    }

    Matrix F(static_cast<Eigen::Index>(n), stage_trees);
    for (int c = 0; c < stage_trees; ++c) F.col(c).setConstant(init[static_cast<std::size_t>(c)]);

    std::vector<Tree> trees;
    std::vector<double> ones(n, 1.0), resid(n), hess(n);
    Matrix P;
    const ColumnOrder order(X);
    for (int m = 0; m < n_est; ++m) {
        if (stage_trees > 1) {
            P = F;
            for (Eigen::Index i = 0; i < P.rows(); ++i) softmax_row(P.row(i));
        }
        for (int c = 0; c < stage_trees; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                switch (loss) {
                case Loss::SquaredError: resid[i] = y[i] - F(ii, 0); break;
                case Loss::AbsoluteError: resid[i] = y[i] > F(ii, 0) ? 1.0 : (y[i] < F(ii, 0) ? -1.0 : 0.0); break;
                case Loss::LogLoss:
                    if (stage_trees > 1) {
                        const double pc = P(ii, c);
                        resid[i] = (y[i] == c ? 1.0 : 0.0) - pc;
                        hess[i] = pc * (1.0 - pc);
                    } else {
                        const double p1 = sigmoid(F(ii, 0));
                        resid[i] = y[i] - p1;
                        hess[i] = p1 * (1.0 - p1);
                    }
                    break;
                case Loss::Exponential: {
                    const double s = 2.0 * y[i] - 1.0;
                    const double e = std::exp(-s * F(ii, 0));
                    resid[i] = s * e;
                    hess[i] = e;
                    break;
                }
                }
            }
            Tree t = build_tree(X, resid, ones, 0, p, rng, &order);
            switch (loss) {
            case Loss::SquaredError: break;
            case Loss::AbsoluteError:
                refit_leaves(t, X, [&](const std::vector<std::size_t>& rows) {
                    std::vector<double> r;
                    for (std::size_t i : rows) r.push_back(y[i] - F(static_cast<Eigen::Index>(i), 0));
                    return median(std::move(r));
                });
                break;
            case Loss::LogLoss: {
                const double factor = stage_trees > 1 ? (k - 1.0) / k : 1.0;
                refit_leaves(t, X, [&](const std::vector<std::size_t>& rows) {
                    double num = 0.0, den = 0.0;
                    for (std::size_t i : rows) {
                        num += resid[i];
                        den += hess[i];
                    }
                    return factor * safe_ratio(num, den);
                });
                break;
            }
            case Loss::Exponential:
                refit_leaves(t, X, [&](const std::vector<std::size_t>& rows) {
                    double num = 0.0, den = 0.0;
                    for (std::size_t i : rows) {
                        num += resid[i];
                        den += hess[i];
                    }
                    return safe_ratio(num, den);
                });
                break;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                F(ii, c) += lr * predict_scalar(t, X.row(ii).data());
            }
            trees.push_back(std::move(t));
        }
    }
    return std::make_unique<GradientBoosting>(loss, k, lr, std::move(init), std::move(trees));
}

EstimatorPtr gradient_boosting_from_json(const ModelSpec& spec, const nlohmann::json& doc) {
    const Loss loss = parse_loss(doc.at("loss").get<std::string>(), spec.task);
    auto init = doc.at("init").get<std::vector<double>>();
    auto trees = trees_from_json(doc.at("trees"));
    if (init.empty() || trees.size() % init.size() != 0) throw ParseError("gradient boosting stage layout is inconsistent");
    return std::make_unique<GradientBoosting>(loss, doc.at("num_classes").get<int>(),
                                              doc.at("learning_rate").get<double>(), std::move(init),
                                              std::move(trees));
}

} // namespace propspec::detail
