#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "oracles.hpp"
#include "propspec/aaindex.hpp"
#include "propspec/error.hpp"
#include "propspec/propgroups.hpp"
#include "propspec/random.hpp"
#include "propspec/stats.hpp"

using namespace propspec;

namespace {

PropertyRecord record(const std::string& acc, const std::vector<double>& v, const std::string& desc = "x") {
    PropertyRecord r{acc, desc, {}, false};
    for (std::size_t i = 0; i < 20; ++i) r.values[i] = v[i];
    return r;
}

std::vector<double> normal_quantiles() {
    std::vector<double> q;
    for (int i = 1; i <= 20; ++i) q.push_back(oracle::phi_inv((i - 0.5) / 20.0));
    return q;
}

Matrix points(std::initializer_list<std::pair<double, double>> pts) {
    Matrix m(static_cast<Eigen::Index>(pts.size()), 2);
    Eigen::Index i = 0;
    for (auto [x, y] : pts) {
        m(i, 0) = x;
        m(i, 1) = y;
        ++i;
    }
    return m;
}

double sse(const Matrix& X, const std::vector<int>& labels, int k) {
    double s = 0;
    for (int c = 0; c < k; ++c) {
        Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(X.cols());
        int n = 0;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            if (labels[static_cast<std::size_t>(i)] == c) {
                mu += X.row(i);
                ++n;
            }
        if (n == 0) continue;
        mu /= n;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            if (labels[static_cast<std::size_t>(i)] == c) s += (X.row(i) - mu).squaredNorm();
    }
    return s;
}

} // namespace

TEST_CASE("KS statistic of exact normal quantiles is 1/(2n)") {
    CHECK(stats::ks_statistic_normal(normal_quantiles()) == doctest::Approx(0.025).epsilon(1e-9));
    CHECK(oracle::ks_d(normal_quantiles()) == doctest::Approx(0.025).epsilon(1e-9));
}

TEST_CASE("KS filter examples") {
    const auto quant = record("Q", normal_quantiles());
    const auto constant = record("C", std::vector<double>(20, 3.0));
    std::vector<double> spike(20, 0.0);
    spike[7] = 100.0;
    const auto spiky = record("S", spike);

    // oracle for the spike: standardize with the sample sd and compute D directly
    std::vector<double> z(spike);
    const double mu = 5.0, sd = std::sqrt((19 * 25.0 + 95.0 * 95.0) / 19.0);
    for (double& v : z) v = (v - mu) / sd;
    CHECK(oracle::ks_d(z) > ks_critical_value(0.05, 20));

    const auto kept = ks_normality_filter({quant, constant, spiky}, 0.05);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].accession == "Q");
    CHECK(ks_critical_value(0.05, 20) == doctest::Approx(1.358 / std::sqrt(20.0)));
    CHECK(ks_critical_value(0.01, 20) == doctest::Approx(1.628 / std::sqrt(20.0)));
    CHECK(ks_critical_value(0.10, 20) == doctest::Approx(1.224 / std::sqrt(20.0)));
    CHECK_THROWS_AS(ks_critical_value(0.2, 20), InvalidArgument);
}

TEST_CASE("KS filter rejects incomplete records") {
    auto r = record("N", normal_quantiles());
    r.values[3] = std::numeric_limits<double>::quiet_NaN();
    r.has_missing = true;
    CHECK_THROWS_AS(ks_normality_filter({r}, 0.05), InvariantViolation);
}

TEST_CASE("KS filter is idempotent on random property sets") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PropertyRecord> recs;
        for (int r = 0; r < 12; ++r) {
            std::vector<double> v(20);
            const bool skewed = rng.index(3) == 0;
            for (double& x : v) x = skewed ? std::exp(2.5 * rng.normal()) : rng.normal();
            recs.push_back(record("R" + std::to_string(r), v));
        }
        const auto once = ks_normality_filter(recs, 0.05);
        const auto twice = ks_normality_filter(once, 0.05);
        REQUIRE(once.size() == twice.size());
        for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].accession == twice[i].accession);
    }
}

TEST_CASE("k-means finds the brute-force optimal 2-partition") {
    const auto X = points({{0, 0}, {0, 0.1}, {10, 10}, {10, 10.1}});
    const auto part = kmeans_cluster(X, 2, 3);
    CHECK(part.k == 2);

    // oracle: enumerate all non-trivial 2-partitions
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_labels;
    for (int mask = 1; mask < 15; ++mask) {
        std::vector<int> l(4);
        for (int i = 0; i < 4; ++i) l[static_cast<std::size_t>(i)] = (mask >> i) & 1;
        const double s = sse(X, l, 2);
        if (s < best) {
            best = s;
            best_labels = l;
        }
    }
    CHECK(sse(X, part.labels, 2) == doctest::Approx(best));
    CHECK(part.labels[0] == part.labels[1]);
    CHECK(part.labels[2] == part.labels[3]);
    CHECK(part.labels[0] != part.labels[2]);
}

TEST_CASE("k-means preconditions and determinism") {
    const auto X = points({{0, 0}, {1, 0}, {5, 5}, {6, 5}, {9, 1}});
    CHECK_THROWS_AS(kmeans_cluster(X, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(kmeans_cluster(Matrix(0, 2), 2, 0), InvalidArgument);
    CHECK_THROWS_AS(kmeans_cluster(points({{1, 1}, {1, 1}, {2, 2}}), 3, 0), InvalidArgument);
    CHECK(kmeans_cluster(X, 3, 42).labels == kmeans_cluster(X, 3, 42).labels);
}

TEST_CASE("Calinski-Harabasz examples") {
    const auto X = points({{0, 0}, {1, 0}, {10, 0}, {11, 0}});
    const std::vector<int> natural{0, 0, 1, 1}, crossed{0, 1, 0, 1};
    CHECK(calinski_harabasz(X, natural, 2) == doctest::Approx(200.0));
    CHECK(calinski_harabasz(X, crossed, 2) < 200.0);
    CHECK_THROWS_WITH_AS(calinski_harabasz(points({{0, 0}, {0, 0}, {4, 4}, {4, 4}}), natural, 2),
                         doctest::Contains("degenerate partition"), DegenerateData);
}

TEST_CASE("Calinski-Harabasz is translation and scale invariant") {
    Rng rng(5);
    Matrix X(30, 3);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = rng.normal() + (i % 3) * 2.0;
    std::vector<int> labels(30);
    for (int i = 0; i < 30; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
    const double ch = calinski_harabasz(X, labels, 3);
    Matrix moved = X.array() + 7.5;
    CHECK(calinski_harabasz(moved, labels, 3) == doctest::Approx(ch).epsilon(1e-10));
    for (double c : {-3.0, 0.01, 250.0}) {
        Matrix scaled = X * c;
        CHECK(calinski_harabasz(scaled, labels, 3) == doctest::Approx(ch).epsilon(1e-10));
    }
}

TEST_CASE("keyword lexicon examples") {
    const auto lex = default_lexicon();
    CHECK(classify_description("Normalized frequency of alpha-helix", lex) == PropertyKeyword::AlphaStructure);
    CHECK(classify_description("Average volumes of residues", lex) == PropertyKeyword::Volume);
    CHECK(classify_description("Something unrelated entirely", lex) == PropertyKeyword::OtherIndexes);
    const auto again = lexicon_from_json(lexicon_to_json(lex));
    CHECK(classify_description("Average volumes of residues", again) == PropertyKeyword::Volume);
}

TEST_CASE("keyword groups partition the records") {
    const auto recs = ks_normality_filter(drop_incomplete(read_aaindex_file(PROPSPEC_DATA_DIR "/aaindex1")), 0.05);
    const auto groups = assign_keyword_groups(recs, default_lexicon());
    REQUIRE(groups.size() == 8);
    std::size_t total = 0;
    std::set<std::string> seen;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        CHECK(groups[g].group_id == "ID-0" + std::to_string(g + 1));
        total += groups[g].members.size();
        for (const auto& m : groups[g].members) CHECK(seen.insert(m.accession).second);
    }
    CHECK(total == recs.size());
}

TEST_CASE("PCA descriptor on collinear groups") {
    const auto q = normal_quantiles();
    std::vector<double> neg(q);
    for (double& v : neg) v = -3.0 * v + 1.0;
    PropertyGroup same{"ID-01", PropertyKeyword::AlphaStructure, {record("a", q), record("b", q)}};
    const auto d1 = group_pca_descriptor(same);
    CHECK(d1.explained_variance == doctest::Approx(1.0));

    PropertyGroup opposite{"ID-02", PropertyKeyword::BetaStructure, {record("a", q), record("b", neg)}};
    const auto d2 = group_pca_descriptor(opposite);
    CHECK(d2.explained_variance == doctest::Approx(1.0));
    CHECK(d2.weight('A') >= 0.0);
    // weights proportional to the common standardized column
    const double mu = stats::mean(q), sd = stats::sample_stddev(q);
    const double ratio = d2.weights[1] / ((q[1] - mu) / sd);
    for (std::size_t i = 0; i < 20; ++i)
        CHECK(d2.weights[i] == doctest::Approx(ratio * (q[i] - mu) / sd).epsilon(1e-9));

    PropertyGroup lonely{"ID-03", PropertyKeyword::Energy, {record("a", q)}};
    CHECK_THROWS_AS(group_pca_descriptor(lonely), InvalidArgument);
}

TEST_CASE("PCA is invariant to member order and maximizes projected variance") {
    Rng rng(9);
    std::vector<PropertyRecord> members;
    for (int m = 0; m < 6; ++m) {
        std::vector<double> v(20);
        for (double& x : v) x = rng.normal();
        members.push_back(record("m" + std::to_string(m), v));
    }
    PropertyGroup g{"ID-05", PropertyKeyword::Hydrophobicity, members};
    const auto d = group_pca_descriptor(g);
    std::reverse(g.members.begin(), g.members.end());
    const auto r = group_pca_descriptor(g);
    for (std::size_t i = 0; i < 20; ++i) CHECK(r.weights[i] == doctest::Approx(d.weights[i]).epsilon(1e-9));
    CHECK(r.explained_variance == doctest::Approx(d.explained_variance));

    Matrix data(20, 6);
    for (Eigen::Index j = 0; j < 6; ++j)
        for (Eigen::Index i = 0; i < 20; ++i) data(i, j) = members[static_cast<std::size_t>(j)].values[static_cast<std::size_t>(i)];
    const auto pc = first_principal_component(data);
    Matrix Z = data;
    for (Eigen::Index j = 0; j < 6; ++j) {
        const double mu = Z.col(j).mean();
        const double sd = std::sqrt((Z.col(j).array() - mu).square().sum() / 19.0);
        Z.col(j) = (Z.col(j).array() - mu) / sd;
    }
    const double best = (Z * pc.direction).squaredNorm();
    for (int t = 0; t < 20; ++t) {
        Vector u(6);
        for (Eigen::Index j = 0; j < 6; ++j) u(j) = rng.normal();
        u.normalize();
        CHECK((Z * u).squaredNorm() <= best + 1e-9);
    }
}
