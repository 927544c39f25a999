#include <algorithm>
#include <cmath>
#include <numbers>

#include "estimator.hpp"
#include "propspec/error.hpp"
#include "propspec/stats.hpp"

namespace propspec::detail {
namespace {

Matrix softmax_rows(Matrix L) {
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        auto row = L.row(i);
        row = (row.array() - row.maxCoeff()).exp();
    }
    return L;
}

/// Gaussian NB; for regression the classes are target bins and the
/// prediction is the posterior-weighted mean target of the bins.
class GaussianNb final : public Estimator {
public:
    GaussianNb(Matrix means, Matrix vars, Vector log_prior, std::vector<double> bin_values, bool regression)
        : means_(std::move(means)), vars_(std::move(vars)), log_prior_(std::move(log_prior)),
          bin_values_(std::move(bin_values)), regression_(regression) {}

    Prediction predict(const Matrix& X) const override {
        const auto k = means_.rows();
        Matrix L(X.rows(), k);
        for (Eigen::Index c = 0; c < k; ++c) {
            const double norm = -0.5 * (2.0 * std::numbers::pi * vars_.row(c).array()).log().sum();
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const auto d = X.row(i).array() - means_.row(c).array();
                L(i, c) = log_prior_(c) + norm - 0.5 * (d.square() / vars_.row(c).array()).sum();
            }
        }
        Prediction p = finalize_classification(softmax_rows(std::move(L)));
        if (!regression_) return p;
        std::vector<double> values(static_cast<std::size_t>(X.rows()));
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index c = 0; c < k; ++c)
                values[static_cast<std::size_t>(i)] += p.scores(i, c) * bin_values_[static_cast<std::size_t>(c)];
        return regression_prediction(std::move(values));
    }

    nlohmann::json to_json() const override {
        return {{"means", matrix_to_json(means_)},
                {"vars", matrix_to_json(vars_)},
                {"log_prior", vector_to_json(log_prior_)},
                {"bin_values", bin_values_},
                {"regression", regression_}};
    }

private:
    Matrix means_;
    Matrix vars_;
    Vector log_prior_;
    std::vector<double> bin_values_;
    bool regression_;
};

class BernoulliNb final : public Estimator {
public:
    BernoulliNb(Matrix log_p, Matrix log_q, Vector log_prior, double threshold)
        : log_p_(std::move(log_p)), log_q_(std::move(log_q)), log_prior_(std::move(log_prior)),
          threshold_(threshold) {}

    Prediction predict(const Matrix& X) const override {
        const auto k = log_p_.rows();
        Matrix L(X.rows(), k);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index c = 0; c < k; ++c) {
                double s = log_prior_(c);
                for (Eigen::Index j = 0; j < X.cols(); ++j) s += X(i, j) > threshold_ ? log_p_(c, j) : log_q_(c, j);
                L(i, c) = s;
            }
        return finalize_classification(softmax_rows(std::move(L)));
    }

    nlohmann::json to_json() const override {
        return {{"log_p", matrix_to_json(log_p_)},
                {"log_q", matrix_to_json(log_q_)},
                {"log_prior", vector_to_json(log_prior_)},
                {"binarize", threshold_}};
    }

private:
    Matrix log_p_;
    Matrix log_q_;
    Vector log_prior_;
    double threshold_;
};

struct ClassStats {
    Matrix means;
    Matrix vars;
    Vector log_prior;
};

ClassStats gaussian_stats(const Matrix& X, std::span<const int> labels, int k, double var_smoothing) {
    const auto d = X.cols();
    double max_var = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mu = X.col(j).mean();
        max_var = std::max(max_var, (X.col(j).array() - mu).square().mean());
    }
    const double eps = var_smoothing * (max_var > 0.0 ? max_var : 1.0);

    ClassStats s{Matrix::Zero(k, d), Matrix::Zero(k, d), Vector::Zero(k)};
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        s.means.row(c) += X.row(i);
        counts[static_cast<std::size_t>(c)] += 1.0;
    }
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0) s.means.row(c) /= counts[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        s.vars.row(c).array() += (X.row(i) - s.means.row(c)).array().square();
    }
    const double n = static_cast<double>(X.rows());
    for (int c = 0; c < k; ++c) {
        const double nc = counts[static_cast<std::size_t>(c)];
        if (nc > 0) s.vars.row(c) /= nc;
        s.vars.row(c).array() += eps;
        // an absent class keeps a finite but negligible prior
        s.log_prior(c) = nc > 0 ? std::log(nc / n) : std::log(1e-300);
    }
    return s;
}

} // namespace

EstimatorPtr fit_gaussian_nb(const ModelSpec& spec, const FitData& data) {
    const double smoothing = spec.get_double("var_smoothing");
    if (!(smoothing > 0.0)) throw InvalidArgument("var_smoothing must be positive");
    const auto n = static_cast<std::size_t>(data.X.rows());
    std::vector<int> labels(n);

    if (data.task == Task::Classification) {
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(data.y[i]);
        auto s = gaussian_stats(data.X, labels, data.num_classes, smoothing);
        return std::make_unique<GaussianNb>(std::move(s.means), std::move(s.vars), std::move(s.log_prior),
                                            std::vector<double>{}, false);
    }

    const auto bins = spec.get_int("n_bins");
    if (bins < 2) throw InvalidArgument("n_bins must be >= 2");
    std::vector<double> sorted(data.y.begin(), data.y.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (std::int64_t b = 1; b < bins; ++b) {
        const double q = stats::quantile_linear(sorted, static_cast<double>(b) / static_cast<double>(bins));
        if (edges.empty() || q > edges.back()) edges.push_back(q);
    }
    // bin b holds values in (edges[b-1], edges[b]]
    std::vector<double> bin_sum(edges.size() + 1, 0.0), bin_count(edges.size() + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(std::lower_bound(edges.begin(), edges.end(), data.y[i]) - edges.begin());
        bin_sum[static_cast<std::size_t>(labels[i])] += data.y[i];
        bin_count[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    // compact away empty bins
    std::vector<int> remap(bin_sum.size(), -1);
    std::vector<double> bin_values;
    for (std::size_t b = 0; b < bin_sum.size(); ++b)
        if (bin_count[b] > 0) {
            remap[b] = static_cast<int>(bin_values.size());
            bin_values.push_back(bin_sum[b] / bin_count[b]);
        }
    if (bin_values.size() < 2) throw DegenerateData("degenerate training data: constant target");
    for (int& l : labels) l = remap[static_cast<std::size_t>(l)];
    auto s = gaussian_stats(data.X, labels, static_cast<int>(bin_values.size()), smoothing);
    return std::make_unique<GaussianNb>(std::move(s.means), std::move(s.vars), std::move(s.log_prior),
                                        std::move(bin_values), true);
}

EstimatorPtr fit_bernoulli_nb(const ModelSpec& spec, const FitData& data) {
    const double alpha = spec.get_double("alpha");
    const double threshold = spec.get_double("binarize");
    if (!(alpha > 0.0)) throw InvalidArgument("bernoulli_nb alpha must be positive");
    const int k = data.num_classes;
    const auto d = data.X.cols();
    Matrix ones = Matrix::Zero(k, d);
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
        const auto c = static_cast<Eigen::Index>(data.y[static_cast<std::size_t>(i)]);
        counts[static_cast<std::size_t>(c)] += 1.0;
        for (Eigen::Index j = 0; j < d; ++j)
            if (data.X(i, j) > threshold) ones(c, j) += 1.0;
    }
    Matrix log_p(k, d), log_q(k, d);
    Vector log_prior(k);
    const double n = static_cast<double>(data.X.rows());
    for (Eigen::Index c = 0; c < k; ++c) {
        const double nc = counts[static_cast<std::size_t>(c)];
        for (Eigen::Index j = 0; j < d; ++j) {
            const double p = (ones(c, j) + alpha) / (nc + 2.0 * alpha);
            log_p(c, j) = std::log(p);
            log_q(c, j) = std::log1p(-p);
        }
        log_prior(c) = nc > 0 ? std::log(nc / n) : std::log(1e-300);
    }
    return std::make_unique<BernoulliNb>(std::move(log_p), std::move(log_q), std::move(log_prior), threshold);
}

EstimatorPtr naive_bayes_from_json(const ModelSpec& spec, const nlohmann::json& doc) {
    if (spec.family == ModelFamily::BernoulliNb)
        return std::make_unique<BernoulliNb>(matrix_from_json(doc.at("log_p")), matrix_from_json(doc.at("log_q")),
                                             vector_from_json(doc.at("log_prior")), doc.at("binarize").get<double>());
    return std::make_unique<GaussianNb>(matrix_from_json(doc.at("means")), matrix_from_json(doc.at("vars")),
                                        vector_from_json(doc.at("log_prior")),
                                        doc.at("bin_values").get<std::vector<double>>(),
                                        doc.at("regression").get<bool>());
}

} // namespace propspec::detail
