#include <algorithm>
#include <cmath>
#include <numeric>

#include "estimator.hpp"
#include "propspec/error.hpp"

namespace propspec::detail {
namespace {

class Knn final : public Estimator {
public:
    Knn(Matrix X, std::vector<double> y, int k, bool distance_weighted, bool manhattan, int num_classes)
        : X_(std::move(X)), y_(std::move(y)), k_(k), distance_weighted_(distance_weighted), manhattan_(manhattan),
          num_classes_(num_classes) {}

    Prediction predict(const Matrix& Q) const override {
        const auto n = static_cast<std::size_t>(X_.rows());
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);
        std::vector<std::pair<double, std::size_t>> dist(n);
        Matrix scores = Matrix::Zero(Q.rows(), std::max(num_classes_, 1));
        std::vector<double> values(static_cast<std::size_t>(Q.rows()));

        for (Eigen::Index q = 0; q < Q.rows(); ++q) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto diff = X_.row(static_cast<Eigen::Index>(i)) - Q.row(q);
                dist[i] = {manhattan_ ? diff.cwiseAbs().sum() : diff.norm(), i};
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

            std::vector<double> w(k, 1.0);
            if (distance_weighted_) {
                const bool exact = dist[0].first == 0.0;
                for (std::size_t j = 0; j < k; ++j)
                    w[j] = exact ? (dist[j].first == 0.0 ? 1.0 : 0.0) : 1.0 / dist[j].first;
            }
            if (num_classes_ > 0) {
                for (std::size_t j = 0; j < k; ++j)
                    scores(q, static_cast<Eigen::Index>(y_[dist[j].second])) += w[j];
            } else {
                double sw = 0.0, swy = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    sw += w[j];
                    swy += w[j] * y_[dist[j].second];
                }
                values[static_cast<std::size_t>(q)] = swy / sw;
            }
        }
        if (num_classes_ > 0) return finalize_classification(std::move(scores));
        return regression_prediction(std::move(values));
    }

    nlohmann::json to_json() const override {
        return {{"X", matrix_to_json(X_)}, {"y", y_}, {"num_classes", num_classes_}};
    }

private:
    Matrix X_;
    std::vector<double> y_;
    int k_;
    bool distance_weighted_;
    bool manhattan_;
    int num_classes_;
};

struct KnnOptions {
    int k;
    bool distance;
    bool manhattan;
};

KnnOptions options(const ModelSpec& spec) {
    const auto k = spec.get_int("n_neighbors");
    if (k < 1) throw InvalidArgument("knn n_neighbors must be >= 1");
    const auto& w = spec.get_string("weights");
    const auto& m = spec.get_string("metric");
    if (w != "uniform" && w != "distance") throw InvalidArgument("knn weights must be uniform or distance");
    if (m != "euclidean" && m != "manhattan") throw InvalidArgument("knn metric must be euclidean or manhattan");
    return {static_cast<int>(k), w == "distance", m == "manhattan"};
}

} // namespace

EstimatorPtr fit_knn(const ModelSpec& spec, const FitData& data) {
    const auto o = options(spec);
    return std::make_unique<Knn>(data.X, std::vector<double>(data.y.begin(), data.y.end()), o.k, o.distance,
                                 o.manhattan, data.num_classes);
}

EstimatorPtr knn_from_json(const ModelSpec& spec, const nlohmann::json& doc) {
    const auto o = options(spec);
    return std::make_unique<Knn>(matrix_from_json(doc.at("X")), doc.at("y").get<std::vector<double>>(), o.k,
                                 o.distance, o.manhattan, doc.at("num_classes").get<int>());
}

} // namespace propspec::detail
