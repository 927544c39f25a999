#include "propspec/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "propspec/error.hpp"
#include "propspec/log.hpp"
#include "propspec/parallel.hpp"
#include "propspec/stats.hpp"

namespace propspec {
namespace {

constexpr double kWeightEpsilon = 1e-6;
constexpr double kMinCalibrationSlope = 1e-6;

nlohmann::json scaler_to_json(const MinMaxScaler& s) {
    return {{"min", std::vector<double>(s.min.data(), s.min.data() + s.min.size())},
            {"max", std::vector<double>(s.max.data(), s.max.data() + s.max.size())}};
}

MinMaxScaler scaler_from_json(const nlohmann::json& doc) {
    const auto lo = doc.at("min").get<std::vector<double>>();
    const auto hi = doc.at("max").get<std::vector<double>>();
    if (lo.size() != hi.size()) throw ParseError("scaler min and max differ in length");
    MinMaxScaler s;
    s.min = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    s.max = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    return s;
}

} // namespace

std::vector<std::size_t> select_outlier_indices(std::span<const double> scores,
                                                std::span<const std::string> group_ids,
                                                std::span<const ModelFamily> families) {
    const std::size_t n = scores.size();
    if (n == 0) throw InvalidArgument("model pool is empty");
    if (group_ids.size() != n || families.size() != n) throw InvalidArgument("pool metadata lengths differ");
    for (double s : scores)
        if (!std::isfinite(s)) throw InvalidArgument("pool contains a non-finite validation score");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const double q1 = stats::quantile_linear(scores, 0.25);
    const double q3 = stats::quantile_linear(scores, 0.75);
    const double fence = q3 + 1.5 * (q3 - q1);
    std::vector<std::size_t> chosen;
    for (std::size_t i : order)
        if (scores[i] > fence) chosen.push_back(i);
    if (chosen.empty()) {
        const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
        chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top));
    }

    std::vector<std::size_t> out;
    for (std::size_t i : chosen) {
        const bool dup = std::any_of(out.begin(), out.end(), [&](std::size_t j) {
            return group_ids[j] == group_ids[i] && families[j] == families[i];
        });
        if (!dup) out.push_back(i);
    }
    return out;
}

std::vector<ScoredModel> select_outlier_models(const std::vector<ScoredModel>& pool) {
    std::vector<double> scores;
    std::vector<std::string> groups;
    std::vector<ModelFamily> families;
    for (const auto& m : pool) {
        scores.push_back(m.validation_score);
        groups.push_back(m.group_id);
        families.push_back(m.model.spec().family);
    }
    std::vector<ScoredModel> out;
    for (std::size_t i : select_outlier_indices(scores, groups, families)) out.push_back(pool[i]);
    return out;
}

std::vector<double> ensemble_weights(std::span<const double> scores) {
    if (scores.empty()) throw InvalidArgument("cannot weight an empty ensemble");
    const double shift = std::min(0.0, *std::min_element(scores.begin(), scores.end()));
    std::vector<double> w(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = scores[i] - shift + kWeightEpsilon;
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

std::optional<Calibration> fit_calibration(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size()) throw InvalidArgument("calibration inputs differ in length");
    if (truth.size() < 3) throw InvalidArgument("calibration needs at least 3 validation points");
    const double mt = stats::mean(truth), mp = stats::mean(predicted);
    double stt = 0.0, stp = 0.0, spp = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        stt += (truth[i] - mt) * (truth[i] - mt);
        stp += (truth[i] - mt) * (predicted[i] - mp);
        spp += (predicted[i] - mp) * (predicted[i] - mp);
    }
    if (stt == 0.0) throw DegenerateData("degenerate target: calibration truth is constant");
    if (spp == 0.0) throw DegenerateData("calibration predictions are constant");
    const double slope = stp / stt;
    if (std::abs(slope) < kMinCalibrationSlope) {
        logger()->warn("calibration rejected: fitted slope {} is below {}", slope, kMinCalibrationSlope);
        return std::nullopt;
    }
    return Calibration{slope, mp - slope * mt};
}

EnsembleModel assemble(std::vector<ScoredModel> selected, Task task) {
    if (selected.empty()) throw InvalidArgument("cannot assemble an empty selection");
    std::vector<double> scores;
    for (const auto& m : selected) {
        if (m.model.spec().task != task) throw InvalidArgument("member task does not match the ensemble task");
        scores.push_back(m.validation_score);
    }
    EnsembleModel e;
    e.task = task;
    e.weights = ensemble_weights(scores);
    e.members = std::move(selected);
    return e;
}

Prediction combine_predictions(Task task, std::span<const double> weights, std::span<const Prediction> predictions) {
    if (weights.size() != predictions.size() || predictions.empty())
        throw InvalidArgument("weights and member predictions differ in count");
    const std::size_t n = predictions.front().values.size();
    for (const auto& p : predictions)
        if (p.values.size() != n) throw InvalidArgument("member predictions differ in length");

    Prediction out;
    if (task == Task::Regression) {
        out.values.assign(n, 0.0);
        for (std::size_t m = 0; m < predictions.size(); ++m)
            for (std::size_t i = 0; i < n; ++i) out.values[i] += weights[m] * predictions[m].values[i];
        return out;
    }
    const auto k = predictions.front().scores.cols();
    Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(n), k);
    for (std::size_t m = 0; m < predictions.size(); ++m) {
        if (predictions[m].scores.cols() != k || predictions[m].scores.rows() != acc.rows())
            throw InvalidArgument("member score matrices differ in shape");
        acc += weights[m] * predictions[m].scores;
    }
    out.values.resize(n);
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < k; ++c)
            if (acc(i, c) > acc(i, best)) best = c;
        out.values[static_cast<std::size_t>(i)] = static_cast<double>(best);
    }
    out.scores = std::move(acc);
    return out;
}

BatchPrediction ensemble_predict(const EnsembleModel& ens, std::span<const std::string> sequences, int jobs) {
    const auto& descriptors = ens.descriptor_table.descriptors;
    const std::size_t n = sequences.size();
    const auto bins = static_cast<Eigen::Index>(ens.padded_length / 2 + 1);
    BatchPrediction batch;
    batch.rows.resize(n);

    std::vector<std::vector<SpectralFeatures>> encoded(n);
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < n; ++i) {
        try {
            if (sequences[i].empty()) throw InvalidArgument("empty sequence");
            encoded[i] = spectral_encode(sequences[i], descriptors, ens.padded_length, ens.residue_policy);
            ok.push_back(i);
        } catch (const Error& e) {
            batch.rows[i].error = e.what();
            ++batch.failed;
        }
    }
    if (n > 0 && ok.empty())
        throw Error("all " + std::to_string(n) + " rows failed; first error: " + batch.rows.front().error);
    if (ok.empty()) return batch;

    std::map<std::string, Matrix> features;
    for (std::size_t g = 0; g < descriptors.size(); ++g) {
        const auto& gid = descriptors[g].group_id;
        Matrix m(static_cast<Eigen::Index>(ok.size()), bins);
        for (std::size_t r = 0; r < ok.size(); ++r) {
            const auto& mags = encoded[ok[r]][g].magnitudes;
            m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(mags.data(), bins);
        }
        features.emplace(gid, apply_minmax(ens.scalers.at(gid), m));
    }

    std::vector<Prediction> preds(ens.members.size());
    parallel_for(ens.members.size(), jobs, [&](std::size_t m) {
        preds[m] = ens.members[m].model.predict(features.at(ens.members[m].group_id));
    });
    const auto combined = combine_predictions(ens.task, ens.weights, preds);

    for (std::size_t r = 0; r < ok.size(); ++r) {
        auto& row = batch.rows[ok[r]];
        row.raw_value = combined.values[r];
        row.value = row.raw_value;
        if (ens.task == Task::Classification) {
            const auto s = combined.scores.row(static_cast<Eigen::Index>(r));
            row.scores.assign(s.data(), s.data() + s.size());
        } else if (ens.calibration) {
            row.value = ens.calibration->apply(row.raw_value);
        }
    }
    return batch;
}

EnsembleModel calibrate(EnsembleModel ens, std::span<const double> validation_pred,
                        std::span<const double> validation_true) {
    if (ens.task != Task::Regression) throw InvalidArgument("calibration is regression-only");
    const auto fit = fit_calibration(validation_pred, validation_true);
    if (!fit) return ens;
    if (ens.calibration) {
        const auto& old = *ens.calibration;
        ens.calibration = Calibration{old.slope * fit->slope, old.intercept + old.slope * fit->intercept};
    } else {
        ens.calibration = fit;
    }
    return ens;
}

nlohmann::json bundle_to_json(const EnsembleModel& ens) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : ens.members) {
        nlohmann::json cv = nlohmann::json::object();
        for (const auto& [k, v] : m.model.cv_scores) cv[k] = v;
        members.push_back({{"group_id", m.group_id},
                           {"family", to_string(m.model.spec().family)},
                           {"hyperparameters", to_json(m.model.spec().params)},
                           {"parameters", m.model.parameters()},
                           {"validation_score", m.validation_score},
                           {"cv_scores", cv}});
    }
    nlohmann::json scalers = nlohmann::json::object();
    for (const auto& [gid, s] : ens.scalers) scalers[gid] = scaler_to_json(s);
    nlohmann::json calibration = nullptr;
    if (ens.calibration) calibration = {{"slope", ens.calibration->slope}, {"intercept", ens.calibration->intercept}};
    return {{"schema_version", kBundleSchemaVersion},
            {"task", to_string(ens.task)},
            {"padded_length", ens.padded_length},
            {"residue_policy", to_string(ens.residue_policy)},
            {"descriptor_table", descriptor_table_to_json(ens.descriptor_table)},
            {"scalers", scalers},
            {"class_names", ens.class_names},
            {"members", members},
            {"weights", ens.weights},
            {"calibration", calibration}};
}

EnsembleModel bundle_from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kBundleSchemaVersion)
            throw ParseError("bundle schema_version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kBundleSchemaVersion) + ")");
        EnsembleModel e;
        e.task = parse_task(doc.at("task").get<std::string>());
        e.padded_length = doc.at("padded_length").get<std::size_t>();
        if (!is_power_of_two(e.padded_length) || e.padded_length < 2)
            throw ParseError("bundle padded_length is not a power of two");
        e.residue_policy = parse_residue_policy(doc.at("residue_policy").get<std::string>());
        e.descriptor_table = descriptor_table_from_json(doc.at("descriptor_table"));
        for (const auto& [gid, s] : doc.at("scalers").items()) e.scalers.emplace(gid, scaler_from_json(s));
        e.class_names = doc.at("class_names").get<std::vector<std::string>>();
        e.weights = doc.at("weights").get<std::vector<double>>();
        if (!doc.at("calibration").is_null()) {
            const auto& c = doc.at("calibration");
            e.calibration = Calibration{c.at("slope").get<double>(), c.at("intercept").get<double>()};
        }

        const auto bins = static_cast<Eigen::Index>(e.padded_length / 2 + 1);
        for (const auto& m : doc.at("members")) {
            ModelSpec spec{parse_family(m.at("family").get<std::string>()), e.task,
                           hyperparameters_from_json(m.at("hyperparameters"))};
            auto model = TrainedModel::from_parameters(spec, m.at("parameters"));
            if (m.contains("cv_scores"))
                for (const auto& [k, v] : m.at("cv_scores").items()) model.cv_scores[k] = v.get<double>();
            const auto gid = m.at("group_id").get<std::string>();
            const bool known = std::any_of(e.descriptor_table.descriptors.begin(), e.descriptor_table.descriptors.end(),
                                           [&](const auto& d) { return d.group_id == gid; });
            if (!known || !e.scalers.contains(gid))
                throw ParseError("member group '" + gid + "' has no descriptor or scaler");
            if (model.feature_dim() != bins || e.scalers.at(gid).dimension() != bins)
                throw ParseError("member group '" + gid + "' feature width does not match padded_length");
            e.members.push_back({std::move(model), gid, m.at("validation_score").get<double>()});
        }
        if (e.members.empty()) throw ParseError("bundle has no members");
        if (e.weights.size() != e.members.size()) throw ParseError("bundle weights and members differ in count");
        for (double w : e.weights)
            if (!(w >= 0.0)) throw ParseError("bundle has a negative weight");
        if (e.task == Task::Classification && e.class_names.size() < 2)
            throw ParseError("classification bundle needs at least two class names");
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed bundle: ") + ex.what());
    }
}

void save_bundle(const EnsembleModel& ens, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write bundle '" + path + "'");
    out << bundle_to_json(ens).dump() << '\n';
    if (!out) throw Error("failed writing bundle '" + path + "'");
}

EnsembleModel load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open bundle '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("bundle '" + path + "' is truncated or not valid JSON: " + e.what());
    }
    return bundle_from_json(doc);
}

} // namespace propspec
