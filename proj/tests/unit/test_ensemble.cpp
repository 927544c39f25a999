#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numeric>

#include "oracles.hpp"
#include "propspec/ensemble.hpp"
#include "propspec/error.hpp"
#include "propspec/metrics.hpp"
#include "propspec/random.hpp"

using namespace propspec;

namespace {

std::vector<std::size_t> select(const std::vector<double>& scores, std::vector<std::string> groups = {},
                                std::vector<ModelFamily> fams = {}) {
    if (groups.empty()) groups.assign(scores.size(), "ID-01");
    if (fams.empty())
        for (std::size_t i = 0; i < scores.size(); ++i) fams.push_back(static_cast<ModelFamily>(i % 10));
    return select_outlier_indices(scores, groups, fams);
}

AminoAcidDescriptor descriptor(const std::string& id, double scale) {
    AminoAcidDescriptor d;
    d.group_id = id;
    for (std::size_t i = 0; i < 20; ++i) d.weights[i] = scale * (static_cast<double>(i) - 9.5) / 10.0;
    d.explained_variance = 0.9;
    return d;
}

/// A small regression ensemble trained directly on encoded features.
EnsembleModel tiny_ensemble(Task task) {
    EnsembleModel e;
    e.task = task;
    e.padded_length = 16;
    e.residue_policy = ResiduePolicy::Error;
    e.descriptor_table.descriptors = {descriptor("ID-01", 1.0), descriptor("ID-02", -0.5)};
    e.descriptor_table.groups = {{"ID-01", PropertyKeyword::AlphaStructure, {}, 0.9},
                                 {"ID-02", PropertyKeyword::BetaStructure, {}, 0.9}};
    if (task == Task::Classification) e.class_names = {"neg", "pos"};

    Rng rng(1);
    std::vector<std::string> seqs;
    std::vector<double> y;
    const std::string aa = "ACDEFGHIKLMNPQRSTVWY";
    for (int i = 0; i < 40; ++i) {
        std::string s;
        for (int j = 0; j < 12; ++j) s += aa[rng.index(i % 2 ? 10 : 20)];
        seqs.push_back(s);
        y.push_back(task == Task::Classification ? i % 2 : static_cast<double>(s.size() % 5) + rng.normal());
    }
    const auto feats = encode_batch(seqs, e.descriptor_table.descriptors, 16, ResiduePolicy::Error);
    std::vector<ScoredModel> members;
    for (std::size_t g = 0; g < 2; ++g) {
        const auto& id = e.descriptor_table.descriptors[g].group_id;
        e.scalers[id] = fit_minmax(feats[g]);
        const Matrix X = apply_minmax(e.scalers[id], feats[g]);
        ModelSpec s{ModelFamily::Knn, task,
                    {{"n_neighbors", std::int64_t{3}}, {"weights", std::string("distance")},
                     {"metric", std::string("euclidean")}}};
        ModelSpec r{ModelFamily::RandomForest, task,
                    {{"n_estimators", std::int64_t{5}}, {"bootstrap", true},
                     {"max_features", std::string(task == Task::Classification ? "sqrt" : "third")},
                     {"seed", std::int64_t{4}}}};
        members.push_back({train_model(s, X, y, task == Task::Classification ? 2 : 0), id, 0.5 + 0.1 * g});
        members.push_back({train_model(r, X, y, task == Task::Classification ? 2 : 0), id, 0.4});
    }
    auto assembled = assemble(std::move(members), task);
    assembled.descriptor_table = e.descriptor_table;
    assembled.padded_length = e.padded_length;
    assembled.scalers = e.scalers;
    assembled.class_names = e.class_names;
    if (task == Task::Regression) assembled.calibration = Calibration{0.8, 0.3};
    return assembled;
}

} // namespace

TEST_CASE("Tukey fence selection examples") {
    const std::vector<double> s{0.50, 0.51, 0.52, 0.90};
    // oracle: quartiles at positions 0.75 and 2.25 of the sorted scores
    const double q1 = 0.50 + 0.75 * 0.01, q3 = 0.52 + 0.25 * 0.38;
    CHECK(q1 == doctest::Approx(0.5075));
    CHECK(q3 == doctest::Approx(0.615));
    CHECK(q3 + 1.5 * (q3 - q1) == doctest::Approx(0.77625));
    CHECK(select(s) == std::vector<std::size_t>{3});

    CHECK(select(std::vector<double>(10, 0.7)).size() == 1);
    CHECK(select(std::vector<double>(41, 0.7)).size() == 3);  // ceil(5% of 41)

    // two outliers sharing group and family: only the better survives
    std::vector<double> d(20, 0.5);
    d[3] = 0.95;
    d[7] = 0.97;
    std::vector<ModelFamily> fams(20, ModelFamily::Knn);
    for (std::size_t i = 0; i < 20; ++i)
        if (i != 3 && i != 7) fams[i] = ModelFamily::Linear;
    CHECK(select(d, {}, fams) == std::vector<std::size_t>{7});
    CHECK_THROWS_AS(select({}), InvalidArgument);
}

TEST_CASE("raising a selected score keeps it selected") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(15);
        for (double& v : s) v = rng.uniform();
        s[0] = 2.0;
        for (auto i : select(s)) {
            auto raised = s;
            raised[i] += rng.uniform();
            const auto again = select(raised);
            CHECK(std::find(again.begin(), again.end(), i) != again.end());
        }
    }
}

TEST_CASE("weights follow the shifted-score rule") {
    const auto w = ensemble_weights(std::vector<double>{0.8, 0.4});
    CHECK(w[0] == doctest::Approx((0.8 + 1e-6) / (1.2 + 2e-6)).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
    CHECK(ensemble_weights(std::vector<double>{0.3}) == std::vector<double>{1.0});
    const auto eq = ensemble_weights(std::vector<double>{0.2, 0.2, 0.2});
    for (double x : eq) CHECK(x == doctest::Approx(1.0 / 3));
    const auto neg = ensemble_weights(std::vector<double>{-0.5, 0.1, 0.7});
    CHECK(std::abs(std::accumulate(neg.begin(), neg.end(), 0.0) - 1.0) <= 1e-12);
    for (double x : neg) CHECK(x > 0.0);
}

TEST_CASE("vote and average combination") {
    Prediction a, b;
    a.values = {0};
    a.scores = Matrix(1, 2);
    a.scores << 1, 0;
    b.values = {1};
    b.scores = Matrix(1, 2);
    b.scores << 0, 1;
    const std::vector<Prediction> two{a, b};
    CHECK(combine_predictions(Task::Classification, std::vector<double>{0.6, 0.4}, two).values[0] == 0);
    CHECK(combine_predictions(Task::Classification, std::vector<double>{0.5, 0.5}, two).values[0] == 0);  // tie
    CHECK(combine_predictions(Task::Classification, std::vector<double>{6, 4}, two).values[0] == 0);

    Prediction r1, r2;
    r1.values = {10};
    r2.values = {20};
    CHECK(combine_predictions(Task::Regression, std::vector<double>{0.5, 0.5}, std::vector<Prediction>{r1, r2})
              .values[0] == 15);
}

TEST_CASE("calibration examples") {
    std::vector<double> truth, pred;
    for (int i = 0; i < 10; ++i) {
        truth.push_back(i * 0.7 - 1);
        pred.push_back(2 * truth.back() + 1);
    }
    const auto c = fit_calibration(pred, truth);
    REQUIRE(c);
    CHECK(c->slope == doctest::Approx(2));
    CHECK(c->intercept == doctest::Approx(1));
    std::vector<double> back;
    for (double p : pred) back.push_back(c->apply(p));
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(back[i] == doctest::Approx(truth[i]).epsilon(1e-12));
    CHECK(pearson(back, truth) == doctest::Approx(pearson(pred, truth)).epsilon(1e-12));

    const auto id = fit_calibration(truth, truth);
    CHECK(id->slope == doctest::Approx(1));
    CHECK(std::abs(id->intercept) <= 1e-12);

    Rng rng(20);
    std::vector<double> t20, p20;
    for (int i = 0; i < 20; ++i) {
        t20.push_back(rng.normal() * 3);
        p20.push_back(1.3 * t20.back() - 0.4 + rng.normal() * 0.5);
    }
    const auto noisy = fit_calibration(p20, t20);
    const auto [a, b] = oracle::line_fit(t20, p20);
    CHECK(std::abs(noisy->slope - a) <= 1e-9);
    CHECK(std::abs(noisy->intercept - b) <= 1e-9);

    std::vector<double> flat;
    for (double t : t20) flat.push_back(1e-8 * t + rng.normal());
    (void)flat;
    CHECK_THROWS_AS(fit_calibration(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidArgument);
}

TEST_CASE("calibrate composes and rejects classification") {
    auto ens = tiny_ensemble(Task::Regression);
    ens.calibration.reset();
    std::vector<double> truth{1, 2, 3, 4, 5}, pred;
    for (double t : truth) pred.push_back(1.5 * t - 2);
    auto once = calibrate(ens, pred, truth);
    REQUIRE(once.calibration);
    std::vector<double> fixed;
    for (double p : pred) fixed.push_back(once.calibration->apply(p));
    const auto twice = calibrate(once, fixed, truth);
    CHECK(twice.calibration->slope == doctest::Approx(1.5));
    CHECK(twice.calibration->intercept == doctest::Approx(-2));
    CHECK_THROWS_WITH_AS(calibrate(tiny_ensemble(Task::Classification), pred, truth),
                         doctest::Contains("regression-only"), InvalidArgument);

    Calibration identity;
    CHECK(identity.apply(3.25) == 3.25);
}

TEST_CASE("single-member ensemble equals its model") {
    auto ens = tiny_ensemble(Task::Classification);
    ens.members.erase(ens.members.begin() + 1, ens.members.end());
    ens.weights = {1.0};
    const std::vector<std::string> seqs{"ACDEFGHIK", "WWWYYY", "KLMNPQ"};
    const auto batch = ensemble_predict(ens, seqs);
    const auto feats = encode_batch(seqs, ens.descriptor_table.descriptors, 16, ResiduePolicy::Error);
    const auto direct = ens.members[0].model.predict(apply_minmax(ens.scalers.at("ID-01"), feats[0]));
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        CHECK(batch.rows[i].value == direct.values[i]);
        for (Eigen::Index c = 0; c < 2; ++c)
            CHECK(batch.rows[i].scores[static_cast<std::size_t>(c)] == direct.scores(static_cast<Eigen::Index>(i), c));
    }
}

TEST_CASE("per-row errors and bundle round trip") {
    for (Task task : {Task::Regression, Task::Classification}) {
        const auto ens = tiny_ensemble(task);
        const std::vector<std::string> seqs{"ACDEF", "AXA", std::string(20, 'A'), "WYV", "KLMNPQRSTV"};
        const auto batch = ensemble_predict(ens, seqs);
        CHECK(batch.failed == 2);
        CHECK_FALSE(batch.rows[1].ok());
        CHECK_FALSE(batch.rows[2].ok());
        CHECK(batch.rows[0].ok());
        CHECK_THROWS_AS(ensemble_predict(ens, std::vector<std::string>{"AXA"}), Error);

        const std::string path = "/tmp/propspec_unit_bundle.json";
        save_bundle(ens, path);
        const auto loaded = load_bundle(path);
        const auto again = ensemble_predict(loaded, seqs);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            CHECK(again.rows[i].value == batch.rows[i].value);
            CHECK(again.rows[i].scores == batch.rows[i].scores);
            CHECK(again.rows[i].error == batch.rows[i].error);
        }

        auto doc = bundle_to_json(ens);
        doc["schema_version"] = 7;
        CHECK_THROWS_WITH_AS(bundle_from_json(doc), doctest::Contains("7"), ParseError);

        std::ifstream in(path);
        std::string text((std::istreambuf_iterator<char>(in)), {});
        std::ofstream(path) << text.substr(0, text.size() / 2);
        CHECK_THROWS_AS(load_bundle(path), ParseError);
        std::remove(path.c_str());
    }
}

TEST_CASE("weighted vote is invariant to positive weight scaling") {
    auto ens = tiny_ensemble(Task::Classification);
    const std::vector<std::string> seqs{"ACDEFGHIK", "WWWYYY", "KLMNPQ", "ACACAC"};
    const auto base = ensemble_predict(ens, seqs);
    for (double& w : ens.weights) w *= 37.0;
    const auto scaled = ensemble_predict(ens, seqs);
    for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(base.rows[i].value == scaled.rows[i].value);
}
