#include "propspec/workflow.hpp"

#include <algorithm>
#include <cmath>

#include "propspec/error.hpp"
#include "propspec/log.hpp"
#include "propspec/parallel.hpp"
#include "propspec/stats.hpp"

namespace propspec {
namespace {

/// Prefixes errors with the pipeline stage that raised them.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const DegenerateData& e) {
        throw DegenerateData(std::string(name) + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string(name) + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(std::string(name) + ": " + e.what());
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

std::optional<MetricsReport> try_metrics(Task task, std::span<const double> truth, std::span<const double> pred,
                                         int num_classes) {
    try {
        if (task == Task::Classification) return classification_metrics(truth, pred, num_classes);
        return regression_metrics(truth, pred);
    } catch (const Error& e) {
        logger()->warn("test metrics unavailable: {}", e.what());
        return std::nullopt;
    }
}

nlohmann::json metrics_json(const std::optional<MetricsReport>& m) {
    if (!m) return nullptr;
    nlohmann::json out = m->values;
    if (!m->flags.empty()) out["flags"] = m->flags;
    return out;
}

} // namespace

TrainResult train_ensemble(const Dataset& ds, const DescriptorTable& table, const TrainConfig& cfg) {
    TrainResult result;
    result.config = cfg;
    result.dropped_count = ds.dropped_count;
    const Task task = cfg.task;
    const bool cls = task == Task::Classification;
    if (ds.task != task) throw InvalidArgument("dataset task does not match the requested task");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) throw InvalidArgument("test_fraction must be in (0, 1)");
    if (table.descriptors.empty()) throw InvalidArgument("descriptor table has no usable groups");
    result.primary_metric = cfg.primary_metric.empty() ? default_primary_metric(task) : cfg.primary_metric;
    validate_primary_metric(task, result.primary_metric);

    if (!cls && std::all_of(ds.targets.begin(), ds.targets.end(), [&](double v) { return v == ds.targets.front(); }))
        throw DegenerateData("degenerate target: every response has the same value");
    const int num_classes = cls ? static_cast<int>(ds.num_classes()) : 0;
    if (cls && num_classes < 2) throw DegenerateData("degenerate target: fewer than two classes");

    result.split = stage("split", [&] { return split_indices(ds, cfg.test_fraction, cfg.seed, cfg.stratify && cls); });
    const auto& train = result.split.train;
    const auto& test = result.split.test;

    const std::size_t padded = stage("encode", [&] {
        const std::size_t need = auto_padded_length(ds.sequences, cfg.residue_policy);
        if (!cfg.padded_length) return need;
        if (!is_power_of_two(*cfg.padded_length) || *cfg.padded_length < need)
            throw InvalidArgument("padded length " + std::to_string(*cfg.padded_length) +
                                  " is not a power of two >= " + std::to_string(need));
        return *cfg.padded_length;
    });
    const auto& descriptors = table.descriptors;
    const auto features = stage("encode", [&] {
        return encode_batch(ds.sequences, descriptors, padded, cfg.residue_policy);
    });

    const auto y_train = select(ds.targets, train);
    const auto folds = stage("cross-validation", [&] { return kfold_indices(y_train, task, cfg.k_folds, cfg.seed); });
    auto grid = enumerate_model_grid(task, cfg.seed);
    if (cfg.max_models > 0) grid = cap_model_grid(grid, cfg.max_models);

    std::vector<Matrix> train_features;
    for (const auto& f : features) train_features.push_back(select_rows(f, train));

    for (const auto& d : descriptors)
        for (const auto& spec : grid) result.pool.push_back({d.group_id, spec, std::nullopt, {}});
    logger()->info("exploring {} models over {} groups ({} folds)", grid.size(), descriptors.size(), folds.size());
    parallel_for(result.pool.size(), cfg.jobs, [&](std::size_t i) {
        auto& entry = result.pool[i];
        const std::size_t g = i / grid.size();
        try {
            entry.cv = kfold_cv(entry.spec, train_features[g], y_train, num_classes, folds, result.primary_metric);
        } catch (const Error& e) {
            entry.error = e.what();
        }
    });

    std::vector<std::size_t> usable;
    std::vector<double> scores;
    std::vector<std::string> groups;
    std::vector<ModelFamily> families;
    for (std::size_t i = 0; i < result.pool.size(); ++i) {
        const auto& e = result.pool[i];
        if (!e.cv || !std::isfinite(e.cv->primary)) {
            logger()->info("{} on {} skipped: {}", e.spec.label(), e.group_id, e.error);
            continue;
        }
        usable.push_back(i);
        scores.push_back(e.cv->primary);
        groups.push_back(e.group_id);
        families.push_back(e.spec.family);
    }
    if (usable.empty()) throw DegenerateData("exploration: no model could be fitted");
    for (std::size_t j : select_outlier_indices(scores, groups, families)) result.selected.push_back(usable[j]);

    // refit selected models on the whole training split
    std::map<std::string, MinMaxScaler> scalers;
    std::map<std::string, Matrix> scaled_train;
    for (std::size_t g = 0; g < descriptors.size(); ++g) {
        auto s = fit_minmax(train_features[g]);
        scaled_train.emplace(descriptors[g].group_id, apply_minmax(s, train_features[g]));
        scalers.emplace(descriptors[g].group_id, std::move(s));
    }
    std::vector<std::optional<ScoredModel>> fitted(result.selected.size());
    stage("assemble", [&] {
        parallel_for(fitted.size(), cfg.jobs, [&](std::size_t m) {
            const auto& e = result.pool[result.selected[m]];
            auto model = train_model(e.spec, scaled_train.at(e.group_id), y_train, num_classes);
            model.cv_scores = e.cv->mean;
            fitted[m] = ScoredModel{std::move(model), e.group_id, e.cv->primary};
        });
    });
    std::vector<ScoredModel> members;
    for (auto& f : fitted) members.push_back(std::move(*f));
    auto ens = assemble(std::move(members), task);
    ens.descriptor_table = table;
    ens.padded_length = padded;
    ens.residue_policy = cfg.residue_policy;
    ens.scalers = std::move(scalers);
    ens.class_names = ds.class_names;

    if (!cls && cfg.calibrate) {
        std::vector<Prediction> oof;
        for (std::size_t idx : result.selected) oof.push_back(Prediction{result.pool[idx].cv->oof_values, {}});
        const auto combined = combine_predictions(task, ens.weights, oof);
        try {
            ens = calibrate(std::move(ens), combined.values, y_train);
        } catch (const Error& e) {
            logger()->warn("calibration skipped: {}", e.what());
        }
    }
    result.ensemble = std::move(ens);
    const auto& E = result.ensemble;

    // training and held-out predictions
    const auto train_batch = ensemble_predict(E, ds.subset(train).sequences, cfg.jobs);
    for (const auto& r : train_batch.rows) result.train_predictions.push_back(r.value);

    const auto test_seq = ds.subset(test).sequences;
    const auto y_test = select(ds.targets, test);
    const auto test_batch = ensemble_predict(E, test_seq, cfg.jobs);
    std::vector<double> raw, calibrated;
    for (const auto& r : test_batch.rows) {
        raw.push_back(r.raw_value);
        calibrated.push_back(r.value);
    }
    result.test_metrics_raw = try_metrics(task, y_test, raw, num_classes);
    result.test_metrics = try_metrics(task, y_test, calibrated, num_classes);

    for (const auto& m : E.members) {
        std::size_t g = 0;
        while (descriptors[g].group_id != m.group_id) ++g;
        const auto X = apply_minmax(E.scalers.at(m.group_id), select_rows(features[g], test));
        const auto pred = m.model.predict(X);
        auto metrics = try_metrics(task, y_test, pred.values, num_classes);
        result.constituents.push_back({m.group_id, m.model.spec().label(), metrics.value_or(MetricsReport{task, {}, {}})});
    }
    return result;
}

nlohmann::json TrainResult::report() const {
    nlohmann::json pool_json = nlohmann::json::array();
    for (const auto& e : pool) {
        nlohmann::json item{{"group_id", e.group_id}, {"model", e.spec.label()}, {"family", to_string(e.spec.family)}};
        if (e.cv) {
            item["cv"] = e.cv->mean;
            item["primary"] = e.cv->primary;
            item["flagged_folds"] = std::count(e.cv->flagged.begin(), e.cv->flagged.end(), true);
        } else {
            item["error"] = e.error;
        }
        pool_json.push_back(item);
    }
    nlohmann::json selected_json = nlohmann::json::array();
    for (std::size_t m = 0; m < selected.size(); ++m) {
        const auto& e = pool[selected[m]];
        selected_json.push_back({{"group_id", e.group_id},
                                 {"model", e.spec.label()},
                                 {"validation_score", e.cv->primary},
                                 {"weight", ensemble.weights[m]}});
    }
    nlohmann::json constituents_json = nlohmann::json::array();
    std::vector<double> primaries;
    for (const auto& c : constituents) {
        constituents_json.push_back({{"group_id", c.group_id}, {"model", c.model}, {"test_metrics", c.test_metrics.values}});
        if (c.test_metrics.values.contains(primary_metric)) primaries.push_back(c.test_metrics.values.at(primary_metric));
    }
    nlohmann::json calibration = nullptr;
    if (ensemble.calibration)
        calibration = {{"slope", ensemble.calibration->slope}, {"intercept", ensemble.calibration->intercept}};

    nlohmann::json out{
        {"seed", config.seed},
        {"task", to_string(config.task)},
        {"config",
         {{"k_folds", config.k_folds},
          {"test_fraction", config.test_fraction},
          {"stratify", config.stratify},
          {"residue_policy", to_string(config.residue_policy)},
          {"primary_metric", primary_metric},
          {"max_models", config.max_models},
          {"calibrate", config.calibrate}}},
        {"n_train", split.train.size()},
        {"n_test", split.test.size()},
        {"dropped_count", dropped_count},
        {"padded_length", ensemble.padded_length},
        {"per_model_cv_scores", pool_json},
        {"selected", selected_json},
        {"weights", ensemble.weights},
        {"calibration", calibration},
        {"test_metrics", {{"raw", metrics_json(test_metrics_raw)}, {"calibrated", metrics_json(test_metrics)}}},
        {"constituent_test_metrics", constituents_json},
        {"train_indices", split.train},
        {"test_indices", split.test},
        {"train_predictions", train_predictions},
    };
    if (!primaries.empty()) {
        out["constituent_median_" + primary_metric] = stats::quantile_linear(primaries, 0.5);
        out["constituent_max_" + primary_metric] = *std::max_element(primaries.begin(), primaries.end());
    }
    return out;
}

} // namespace propspec
