#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "propspec/cross_validation.hpp"
#include "propspec/error.hpp"
#include "propspec/metrics.hpp"
#include "propspec/random.hpp"

using namespace propspec;

TEST_CASE("classification metric examples") {
    const std::vector<double> t{1, 1, 0, 0}, p{1, 0, 0, 0};
    const auto m = classification_metrics(t, p, 2);
    CHECK(m.at("accuracy") == doctest::Approx(0.75));
    CHECK(m.at("precision") == doctest::Approx(1.0));
    CHECK(m.at("recall") == doctest::Approx(0.5));
    CHECK(m.at("f_score") == doctest::Approx(2.0 / 3.0));

    const auto same = classification_metrics(t, t, 2);
    for (const auto& name : metric_names(Task::Classification)) CHECK(same.at(name) == 1.0);

    const std::vector<double> none{0, 0, 0, 0};
    const auto neg = classification_metrics(t, none, 2);
    CHECK(neg.at("precision") == 0.0);
    CHECK(neg.at("recall") == 0.0);
    CHECK(std::find(neg.flags.begin(), neg.flags.end(), "precision_zero_division") != neg.flags.end());
    CHECK_THROWS_AS(classification_metrics(t, std::vector<double>{1, 0}, 2), InvalidArgument);
}

TEST_CASE("regression metric examples") {
    const std::vector<double> y{1, 2, 3}, ny{-1, -2, -3};
    const auto same = regression_metrics(y, y);
    CHECK(same.at("pearson") == doctest::Approx(1));
    CHECK(same.at("kendall_tau") == doctest::Approx(1));
    CHECK(same.at("spearman") == doctest::Approx(1));
    CHECK(same.at("r_score") == doctest::Approx(1));
    const auto anti = regression_metrics(y, ny);
    CHECK(anti.at("pearson") == doctest::Approx(-1));
    CHECK(anti.at("kendall_tau") == doctest::Approx(-1));
    CHECK(anti.at("spearman") == doctest::Approx(-1));
    const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
    CHECK(kendall_tau_a(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK(oracle::kendall_a(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_WITH_AS(regression_metrics(std::vector<double>{2, 2, 2}, y), doctest::Contains("degenerate target"),
                         DegenerateData);
}

TEST_CASE("metric invariances") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(25), y(25);
        for (std::size_t i = 0; i < 25; ++i) {
            x[i] = rng.normal();
            y[i] = x[i] + rng.normal();
        }
        std::vector<double> affine(x), mono(x);
        for (std::size_t i = 0; i < 25; ++i) {
            affine[i] = 3.5 * x[i] - 2;
            mono[i] = std::exp(x[i]) + x[i] * x[i] * x[i];
        }
        CHECK(pearson(affine, y) == doctest::Approx(pearson(x, y)).epsilon(1e-12));
        CHECK(kendall_tau_a(mono, y) == doctest::Approx(kendall_tau_a(x, y)).epsilon(1e-12));
        CHECK(spearman(mono, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));

        std::vector<double> t(30), p(30), t2(30), p2(30);
        for (std::size_t i = 0; i < 30; ++i) {
            t[i] = static_cast<double>(rng.index(3));
            p[i] = static_cast<double>(rng.index(3));
            // relabel 0 -> 2, 1 -> 0, 2 -> 1
            t2[i] = std::fmod(t[i] + 2, 3);
            p2[i] = std::fmod(p[i] + 2, 3);
        }
        const auto m1 = classification_metrics(t, p, std::nullopt), m2 = classification_metrics(t2, p2, std::nullopt);
        CHECK(m1.at("precision") == doctest::Approx(m2.at("precision")).epsilon(1e-12));
        CHECK(m1.at("recall") == doctest::Approx(m2.at("recall")).epsilon(1e-12));
    }
}

TEST_CASE("k-fold partitions and determinism") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng.index(60);
        const int k = 2 + static_cast<int>(rng.index(std::min<std::size_t>(9, n - 1)));
        const Task task = trial % 2 ? Task::Classification : Task::Regression;
        std::vector<double> y(n);
        for (double& v : y) v = task == Task::Classification ? static_cast<double>(rng.index(3)) : rng.normal();
        const auto folds = kfold_indices(y, task, k, static_cast<std::uint64_t>(trial));
        REQUIRE(folds.size() == static_cast<std::size_t>(k));
        std::set<std::size_t> seen;
        for (const auto& f : folds) {
            CHECK(f.train.size() + f.test.size() == n);
            for (auto i : f.test) CHECK(seen.insert(i).second);
            std::set<std::size_t> tr(f.train.begin(), f.train.end());
            for (auto i : f.test) CHECK(tr.count(i) == 0);
        }
        CHECK(seen.size() == n);
        const auto again = kfold_indices(y, task, k, static_cast<std::uint64_t>(trial));
        for (std::size_t f = 0; f < folds.size(); ++f) CHECK(again[f].test == folds[f].test);
    }
    CHECK_THROWS_AS(kfold_indices(std::vector<double>{1, 2, 3}, Task::Regression, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(kfold_indices(std::vector<double>{1, 2, 3}, Task::Regression, 4, 0), InvalidArgument);
}

TEST_CASE("leave-one-out 1-NN over twinned points is perfect") {
    Matrix X(8, 2);
    std::vector<double> y;
    for (int i = 0; i < 4; ++i) {
        X.row(2 * i) << i * 1.0, i * i * 0.5;
        X.row(2 * i + 1) << i * 1.0, i * i * 0.5;
        y.push_back(i % 2);
        y.push_back(i % 2);
    }
    const ModelSpec nn{ModelFamily::Knn, Task::Classification,
                       {{"n_neighbors", std::int64_t{1}}, {"weights", std::string("uniform")},
                        {"metric", std::string("euclidean")}}};
    const auto cv = kfold_cv(nn, X, y, 2, 8, 0, "accuracy");
    CHECK(cv.folds.size() == 8);
    for (const auto& f : cv.folds) CHECK(f.at("accuracy") == 1.0);
    CHECK(cv.primary == 1.0);
    CHECK(cv.oof_values == y);
}

TEST_CASE("mean CV score lies between fold extremes") {
    Rng rng(8);
    Matrix X(50, 3);
    std::vector<double> y;
    for (Eigen::Index i = 0; i < 50; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = rng.normal();
        y.push_back(X(i, 0) - X(i, 1) + 0.3 * rng.normal());
    }
    const ModelSpec ridge{ModelFamily::Linear, Task::Regression, {{"alpha", 0.1}}};
    const auto cv = kfold_cv(ridge, X, y, 0, 5, 3, "pearson");
    double lo = 1e9, hi = -1e9;
    for (const auto& f : cv.folds) {
        lo = std::min(lo, f.at("pearson"));
        hi = std::max(hi, f.at("pearson"));
    }
    CHECK(cv.primary >= lo);
    CHECK(cv.primary <= hi);
    CHECK(kfold_cv(ridge, X, y, 0, 5, 3, "pearson").oof_values == cv.oof_values);
    CHECK_THROWS_AS(kfold_cv(ridge, X, y, 0, 5, 3, "rmse"), InvalidArgument);
}
