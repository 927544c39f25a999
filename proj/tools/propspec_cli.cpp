#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "propspec/aaindex.hpp"
#include "propspec/csv.hpp"
#include "propspec/dataset.hpp"
#include "propspec/encoding.hpp"
#include "propspec/ensemble.hpp"
#include "propspec/error.hpp"
#include "propspec/log.hpp"
#include "propspec/metrics.hpp"
#include "propspec/propgroups.hpp"
#include "propspec/workflow.hpp"

using namespace propspec;

namespace {

struct Options {
    std::string aaindex, dataset, descriptors, bundle, sequences, out, report, lexicon;
    std::string task = "regression";
    std::string seq_col = "sequence", target_col = "target";
    std::optional<std::uint64_t> seed;
    int k_folds = 5;
    double test_fraction = 0.2;
    double alpha = 0.05;
    std::string residue_policy = "error";
    std::string primary_metric;
    int jobs = 1;
    std::size_t max_models = 0;
    std::size_t padded_length = 0;
    std::string format = "csv";
    bool no_calibration = false;
    bool no_stratify = false;
    std::string log_level = "warn";
};

/// Writes to `path`, or stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

std::string fmt_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

int cmd_descriptors(const Options& o) {
    const auto records = read_aaindex_file(o.aaindex);
    Lexicon lexicon = default_lexicon();
    if (!o.lexicon.empty()) lexicon = lexicon_from_json(nlohmann::json::parse(csv::read_file(o.lexicon)));
    const auto run = derive_descriptors(records, o.alpha, lexicon);
    if (!o.out.empty()) write_descriptor_table(run.table, o.out);

    std::cout << "records parsed " << run.parsed << ", complete " << run.complete << ", normal (alpha=" << o.alpha
              << ") " << run.normal << "\n\n";
    std::printf("%-6s  %-20s  %7s  %18s\n", "group", "keyword", "members", "explained variance");
    for (const auto& g : run.table.groups) {
        const std::string var = g.explained_variance ? fmt_pct(*g.explained_variance) : "flagged (<2 members)";
        std::printf("%-6s  %-20s  %7zu  %18s\n", g.group_id.c_str(), std::string(to_string(g.keyword)).c_str(),
                    g.member_accessions.size(), var.c_str());
    }
    std::fflush(stdout);
    return 0;
}

std::vector<std::string> read_sequences(const std::string& path, const std::string& column) {
    const auto rows = csv::parse(csv::read_file(path));
    if (rows.empty()) return {};
    const auto& header = rows.front();
    const auto it = std::find(header.begin(), header.end(), column);
    std::vector<std::string> out;
    if (it == header.end()) {
        // plain list, one sequence per line
        for (const auto& r : rows)
            if (!r.empty()) out.push_back(r.front());
        return out;
    }
    const auto col = static_cast<std::size_t>(it - header.begin());
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(col < rows[i].size() ? rows[i][col] : std::string());
    return out;
}

int cmd_encode(const Options& o) {
    const auto table = read_descriptor_table(o.descriptors);
    const auto policy = parse_residue_policy(o.residue_policy);
    const auto seqs = read_sequences(o.dataset, o.seq_col);
    const std::size_t padded = o.padded_length > 0 ? o.padded_length : auto_padded_length(seqs, policy);
    const auto groups = encode_batch(seqs, table.descriptors, padded, policy);
    std::ostringstream buf;
    if (o.format == "csv") {
        write_feature_csv(buf, groups);
    } else if (o.format == "binary") {
        std::vector<std::string> ids;
        for (const auto& d : table.descriptors) ids.push_back(d.group_id);
        write_feature_binary(buf, groups, ids, padded);
    } else {
        throw InvalidArgument("--format must be csv or binary");
    }
    emit(o.out, buf.str());
    logger()->info("encoded {} sequences with padded length {}", seqs.size(), padded);
    return 0;
}

int cmd_train(const Options& o) {
    if (!o.seed) throw InvalidArgument("--seed is required for train");
    TrainConfig cfg;
    cfg.task = parse_task(o.task);
    cfg.seed = *o.seed;
    cfg.k_folds = o.k_folds;
    cfg.test_fraction = o.test_fraction;
    cfg.stratify = !o.no_stratify;
    cfg.residue_policy = parse_residue_policy(o.residue_policy);
    cfg.primary_metric = o.primary_metric;
    cfg.jobs = o.jobs;
    cfg.max_models = o.max_models;
    if (o.padded_length > 0) cfg.padded_length = o.padded_length;
    cfg.calibrate = !o.no_calibration;

    const auto ds = load_dataset(o.dataset, {o.seq_col, o.target_col}, cfg.task);
    const auto table = read_descriptor_table(o.descriptors);
    const auto result = train_ensemble(ds, table, cfg);
    if (!o.out.empty()) save_bundle(result.ensemble, o.out);
    const auto report = result.report();
    if (!o.report.empty()) emit(o.report, report.dump(2) + "\n");

    std::cout << "train " << result.split.train.size() << " / test " << result.split.test.size() << ", "
              << result.pool.size() << " models explored, " << result.selected.size() << " selected\n\n";
    std::printf("%-6s  %-64s  %10s  %8s\n", "group", "model", "cv score", "weight");
    for (std::size_t m = 0; m < result.selected.size(); ++m) {
        const auto& e = result.pool[result.selected[m]];
        std::printf("%-6s  %-64s  %10s  %8s\n", e.group_id.c_str(), e.spec.label().c_str(), fmt(e.cv->primary).c_str(),
                    fmt(result.ensemble.weights[m]).c_str());
    }
    if (result.ensemble.calibration)
        std::cout << "\ncalibration: slope " << fmt(result.ensemble.calibration->slope) << ", intercept "
                  << fmt(result.ensemble.calibration->intercept) << "\n";
    std::cout << "\ntest metrics:\n";
    if (result.test_metrics) {
        for (const auto& [k, v] : result.test_metrics->values) {
            std::cout << "  " << k << " " << fmt(v);
            if (cfg.task == Task::Regression && result.test_metrics_raw)
                std::cout << " (uncalibrated " << fmt(result.test_metrics_raw->values.at(k)) << ")";
            std::cout << "\n";
        }
    } else {
        std::cout << "  unavailable\n";
    }
    return 0;
}

int cmd_predict(const Options& o) {
    const auto ens = load_bundle(o.bundle);
    const auto seqs = read_sequences(o.sequences, o.seq_col);
    const auto batch = seqs.empty() ? BatchPrediction{} : ensemble_predict(ens, seqs, o.jobs);
    const bool cls = ens.task == Task::Classification;

    std::ostringstream out;
    out.precision(17);
    out << "sequence,prediction";
    if (cls) {
        out << ",label";
        for (const auto& c : ens.class_names) out << ',' << csv::escape("score_" + c);
    } else {
        out << ",raw_prediction";
    }
    out << ",error\n";
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        const auto& r = batch.rows[i];
        out << csv::escape(seqs[i]) << ',';
        if (r.ok()) {
            out << r.value;
            if (cls) {
                out << ',' << csv::escape(ens.class_names[static_cast<std::size_t>(r.value)]);
                for (double s : r.scores) out << ',' << s;
            } else {
                out << ',' << r.raw_value;
            }
            out << ",\n";
        } else {
            out << ",";
            if (cls)
                for (std::size_t c = 0; c < ens.class_names.size(); ++c) out << ',';
            out << ',' << csv::escape(r.error) << '\n';
        }
    }
    emit(o.out, out.str());
    if (batch.failed > 0) logger()->warn("{} of {} rows could not be predicted", batch.failed, seqs.size());
    return 0;
}

int cmd_evaluate(const Options& o) {
    const auto ens = load_bundle(o.bundle);
    auto ds = load_dataset(o.dataset, {o.seq_col, o.target_col}, ens.task);
    if (ens.task == Task::Classification) {
        std::map<std::string, double> ids;
        for (std::size_t c = 0; c < ens.class_names.size(); ++c) ids[ens.class_names[c]] = static_cast<double>(c);
        for (auto& t : ds.targets) {
            const auto& name = ds.class_names[static_cast<std::size_t>(t)];
            if (!ids.contains(name)) throw InvalidArgument("label '" + name + "' is not a class of the bundle");
            t = ids.at(name);
        }
    }
    const auto batch = ensemble_predict(ens, ds.sequences, o.jobs);
    std::vector<double> truth, pred, raw;
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        if (!batch.rows[i].ok()) continue;
        truth.push_back(ds.targets[i]);
        pred.push_back(batch.rows[i].value);
        raw.push_back(batch.rows[i].raw_value);
    }
    nlohmann::json doc{{"n", ds.size()}, {"failed_rows", batch.failed}, {"task", to_string(ens.task)}};
    std::cout << "metric            value\n";
    if (ens.task == Task::Classification) {
        const auto m = classification_metrics(truth, pred, ens.num_classes());
        doc["metrics"] = m.values;
        for (const auto& [k, v] : m.values) std::printf("%-16s  %s\n", k.c_str(), fmt(v).c_str());
    } else {
        const auto m = regression_metrics(truth, pred);
        const auto mr = regression_metrics(truth, raw);
        doc["metrics"] = m.values;
        doc["metrics_uncalibrated"] = mr.values;
        for (const auto& [k, v] : m.values)
            std::printf("%-16s  %s (uncalibrated %s)\n", k.c_str(), fmt(v).c_str(), fmt(mr.values.at(k)).c_str());
    }
    std::fflush(stdout);
    if (!o.out.empty()) emit(o.out, doc.dump(2) + "\n");
    return 0;
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--residue-policy", o.residue_policy, "error | skip | mean")
        ->check(CLI::IsMember({"error", "skip", "mean"}));
    cmd->add_option("--seq-col", o.seq_col, "sequence column name");
    cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral encoding of peptide sequences and ensemble model training"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--log-level", o.log_level, "trace | debug | info | warn | error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    auto* desc = app.add_subcommand("descriptors", "derive the eight group descriptors from AAIndex1");
    desc->add_option("--aaindex", o.aaindex, "AAIndex1 flat file")->required();
    desc->add_option("--out", o.out, "descriptor table JSON");
    desc->add_option("--alpha", o.alpha, "KS significance level")->check(CLI::IsMember({0.01, 0.05, 0.10}));
    desc->add_option("--lexicon", o.lexicon, "keyword lexicon JSON overriding the default");

    auto* enc = app.add_subcommand("encode", "write FFT feature matrices for a sequence file");
    enc->add_option("--dataset", o.dataset, "CSV with a sequence column, or one sequence per line")->required();
    enc->add_option("--descriptors", o.descriptors, "descriptor table JSON")->required();
    enc->add_option("--padded-length", o.padded_length, "FFT length (power of two); default auto");
    enc->add_option("--format", o.format, "csv | binary")->check(CLI::IsMember({"csv", "binary"}));
    enc->add_option("--out", o.out, "output file (default stdout)");
    add_common(enc, o);

    auto* train = app.add_subcommand("train", "explore the model grid and assemble an ensemble");
    train->add_option("--dataset", o.dataset, "training CSV")->required();
    train->add_option("--descriptors", o.descriptors, "descriptor table JSON")->required();
    train->add_option("--task", o.task, "classification | regression")
        ->required()
        ->check(CLI::IsMember({"classification", "regression"}));
    train->add_option("--target-col", o.target_col, "response column name");
    train->add_option("--seed", o.seed, "seed for every random choice")->required();
    train->add_option("--k-folds", o.k_folds, "cross-validation folds")->check(CLI::Range(2, 1000));
    train->add_option("--test-fraction", o.test_fraction, "held-out fraction")->check(CLI::Range(0.0, 1.0));
    train->add_option("--primary-metric", o.primary_metric, "selection metric (default f_score / pearson)");
    train->add_option("--max-models", o.max_models, "cap on grid size per group (0 = full grid)");
    train->add_option("--padded-length", o.padded_length, "FFT length (power of two); default auto");
    train->add_flag("--no-calibration", o.no_calibration, "skip regression calibration");
    train->add_flag("--no-stratify", o.no_stratify, "plain shuffled split for classification");
    train->add_option("--out", o.out, "bundle JSON")->required();
    train->add_option("--report", o.report, "report JSON");
    add_common(train, o);

    auto* pred = app.add_subcommand("predict", "predict sequences with a bundle");
    pred->add_option("--bundle", o.bundle, "bundle JSON")->required();
    pred->add_option("--sequences", o.sequences, "CSV with a sequence column, or one sequence per line")->required();
    pred->add_option("--out", o.out, "predictions CSV (default stdout)");
    add_common(pred, o);

    auto* eval = app.add_subcommand("evaluate", "score a bundle on a labelled dataset");
    eval->add_option("--bundle", o.bundle, "bundle JSON")->required();
    eval->add_option("--dataset", o.dataset, "labelled CSV")->required();
    eval->add_option("--target-col", o.target_col, "response column name");
    eval->add_option("--out", o.out, "metrics JSON");
    add_common(eval, o);

    CLI11_PARSE(app, argc, argv);
    logger()->set_level(spdlog::level::from_str(o.log_level));

    try {
        if (*desc) return cmd_descriptors(o);
        if (*enc) return cmd_encode(o);
        if (*train) return cmd_train(o);
        if (*pred) return cmd_predict(o);
        if (*eval) return cmd_evaluate(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
