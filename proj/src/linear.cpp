#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "estimator.hpp"
#include "propspec/error.hpp"
#include "propspec/random.hpp"

namespace propspec::detail {
namespace {

enum class Link { Identity, Softmax, SignedMargin };

/// Z = X W + b, followed by the link: identity (regression), softmax over
/// columns, or a single margin m mapped to softmax(-m, m).
class LinearModel final : public Estimator {
public:
    LinearModel(Matrix W, Vector b, Link link) : W_(std::move(W)), b_(std::move(b)), link_(link) {}

    Prediction predict(const Matrix& X) const override {
        Matrix Z = X * W_;
        Z.rowwise() += b_.transpose();
        if (link_ == Link::Identity) return regression_prediction(std::vector<double>(Z.data(), Z.data() + Z.rows()));
        if (link_ == Link::SignedMargin) {
            Matrix S(Z.rows(), 2);
            S.col(0) = -Z.col(0);
            S.col(1) = Z.col(0);
            Z = std::move(S);
        }
        for (Eigen::Index i = 0; i < Z.rows(); ++i) {
            auto row = Z.row(i);
            row = (row.array() - row.maxCoeff()).exp();
        }
        return finalize_classification(std::move(Z));
    }

    nlohmann::json to_json() const override {
        static constexpr const char* names[] = {"identity", "softmax", "signed_margin"};
        return {{"W", matrix_to_json(W_)}, {"b", vector_to_json(b_)}, {"link", names[static_cast<int>(link_)]}};
    }

private:
    Matrix W_;
    Vector b_;
    Link link_;
};

Link parse_link(const std::string& s) {
    if (s == "identity") return Link::Identity;
    if (s == "softmax") return Link::Softmax;
    if (s == "signed_margin") return Link::SignedMargin;
    throw ParseError("unknown link '" + s + "'");
}

EstimatorPtr fit_ridge(const Matrix& X, std::span<const double> y_span, double alpha) {
    const Eigen::Map<const Vector> y(y_span.data(), static_cast<Eigen::Index>(y_span.size()));
    const Eigen::RowVectorXd mu = X.colwise().mean();
    const double y_mu = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - mu;
    const Vector yc = y.array() - y_mu;
    Vector w;
    if (alpha == 0.0) {
        w = Xc.completeOrthogonalDecomposition().solve(yc);
    } else if (Xc.cols() <= Xc.rows()) {
        Eigen::MatrixXd A = Xc.transpose() * Xc;
        A.diagonal().array() += alpha;
        w = A.ldlt().solve(Xc.transpose() * yc);
    } else {
        Eigen::MatrixXd K = Xc * Xc.transpose();
        K.diagonal().array() += alpha;
        w = Xc.transpose() * K.ldlt().solve(yc);
    }
    if (!w.allFinite()) throw DegenerateData("degenerate training data: ridge solve failed");
    Matrix W = w;
    Vector b(1);
    b(0) = y_mu - mu.dot(w);
    return std::make_unique<LinearModel>(std::move(W), std::move(b), Link::Identity);
}

double spectral_norm_sq(const Matrix& A) {
    Vector v = Vector::Ones(A.cols()) / std::sqrt(static_cast<double>(A.cols()));
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
        Vector u = A.transpose() * (A * v);
        const double nu = u.norm();
        if (nu == 0.0) return 0.0;
        v = u / nu;
        if (std::abs(nu - lambda) <= 1e-10 * nu) return nu;
        lambda = nu;
    }
    return lambda;
}

/// Multinomial logistic regression: sum of log losses + alpha/2 |W|^2,
/// intercepts unpenalized. Accelerated gradient descent with step 1/L.
EstimatorPtr fit_logistic(const Matrix& X, std::span<const double> y, int k, double alpha) {
    const auto n = X.rows();
    const auto d = X.cols();
    Matrix Xa(n, d + 1);
    Xa.leftCols(d) = X;
    Xa.col(d).setOnes();
    Matrix Y = Matrix::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])) = 1.0;

    const double L = 0.5 * spectral_norm_sq(Xa) * 1.01 + alpha;
    const double step = 1.0 / L;
    Matrix W = Matrix::Zero(d + 1, k);
    Matrix V = W;
    double t = 1.0;
    Matrix G(d + 1, k), P(n, k);
    for (int it = 0; it < 2000; ++it) {
        P = Xa * V;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto row = P.row(i);
            row = (row.array() - row.maxCoeff()).exp();
            row /= row.sum();
        }
        G = Xa.transpose() * (P - Y);
        G.topRows(d) += alpha * V.topRows(d);
        const Matrix W_next = V - step * G;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        V = W_next + ((t - 1.0) / t_next) * (W_next - W);
        const double change = (W_next - W).norm();
        W = W_next;
        t = t_next;
        if (change <= 1e-10 * (1.0 + W.norm())) break;
    }
    if (!W.allFinite()) throw DegenerateData("degenerate training data: logistic fit diverged");
    Vector b = W.row(d).transpose();
    Matrix Wx = W.topRows(d);
    return std::make_unique<LinearModel>(std::move(Wx), std::move(b), Link::Softmax);
}

/// Pegasos with a bias column, averaged iterates and projection onto the
/// ball of radius 1/sqrt(lambda). `loss` returns the subgradient scale of
/// the loss at margin/residual for a target.
template <typename SubGrad>
Vector pegasos(const Matrix& Xa, std::span<const double> target, double C, int epochs, Rng& rng, SubGrad subgrad) {
    const auto n = Xa.rows();
    const double lambda = 1.0 / (C * static_cast<double>(n));
    const double radius = 1.0 / std::sqrt(lambda);
    Vector w = Vector::Zero(Xa.cols());
    Vector avg = Vector::Zero(Xa.cols());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::int64_t t = 0;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(std::span<Eigen::Index>(order));
        for (Eigen::Index i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double g = subgrad(Xa.row(i).dot(w), target[static_cast<std::size_t>(i)]);
            w *= 1.0 - eta * lambda;
            if (g != 0.0) w -= eta * g * Xa.row(i).transpose();
            const double norm = w.norm();
            if (norm > radius) w *= radius / norm;
            avg += (w - avg) / static_cast<double>(t);
        }
    }
    return avg;
}

} // namespace

EstimatorPtr fit_linear(const ModelSpec& spec, const FitData& data) {
    const double alpha = spec.get_double("alpha");
    if (!(alpha >= 0.0)) throw InvalidArgument("linear alpha must be >= 0");
    if (data.task == Task::Regression) return fit_ridge(data.X, data.y, alpha);
    if (alpha == 0.0) throw InvalidArgument("logistic regression needs alpha > 0");
    return fit_logistic(data.X, data.y, data.num_classes, alpha);
}

EstimatorPtr fit_svm_linear(const ModelSpec& spec, const FitData& data) {
    const double C = spec.get_double("C");
    if (!(C > 0.0)) throw InvalidArgument("svm C must be positive");
    const auto epochs = static_cast<int>(spec.get_int("epochs"));
    if (epochs < 1) throw InvalidArgument("svm epochs must be >= 1");
    Rng rng(spec.seed());

    const auto n = data.X.rows();
    const auto d = data.X.cols();
    Matrix Xa(n, d + 1);
    Xa.leftCols(d) = data.X;
    Xa.col(d).setOnes();
    const auto hinge = [](double margin, double target) { return target * margin < 1.0 ? -target : 0.0; };

    if (data.task == Task::Regression) {
        const double mu = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double v : data.y) var += (v - mu) * (v - mu);
        const double sd = std::sqrt(var / static_cast<double>(n));
        if (!(sd > 0.0)) throw DegenerateData("degenerate training data: constant target");
        std::vector<double> z(data.y.size());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = (data.y[i] - mu) / sd;
        constexpr double eps = 0.1;
        const Vector w = pegasos(Xa, z, C, epochs, rng, [](double pred, double target) {
            const double r = pred - target;
            return r > eps ? 1.0 : (r < -eps ? -1.0 : 0.0);
        });
        Matrix W = w.head(d) * sd;
        Vector b(1);
        b(0) = w(d) * sd + mu;
        return std::make_unique<LinearModel>(std::move(W), std::move(b), Link::Identity);
    }

    const int k = data.num_classes;
    const int machines = k == 2 ? 1 : k;
    Matrix W(d, machines);
    Vector b(machines);
    std::vector<double> s(data.y.size());
    for (int m = 0; m < machines; ++m) {
        const double positive = k == 2 ? 1.0 : m;
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = data.y[i] == positive ? 1.0 : -1.0;
        const Vector w = pegasos(Xa, s, C, epochs, rng, hinge);
        W.col(m) = w.head(d);
        b(m) = w(d);
    }
    return std::make_unique<LinearModel>(std::move(W), std::move(b), k == 2 ? Link::SignedMargin : Link::Softmax);
}

EstimatorPtr linear_from_json(const ModelSpec&, const nlohmann::json& doc) {
    Matrix W = matrix_from_json(doc.at("W"));
    Vector b = vector_from_json(doc.at("b"));
    if (W.cols() != b.size()) throw ParseError("linear weights and intercepts differ in width");
    return std::make_unique<LinearModel>(std::move(W), std::move(b), parse_link(doc.at("link").get<std::string>()));
}

} // namespace propspec::detail
