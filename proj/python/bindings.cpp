#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "propspec/aaindex.hpp"
#include "propspec/encoding.hpp"
#include "propspec/ensemble.hpp"
#include "propspec/error.hpp"
#include "propspec/metrics.hpp"
#include "propspec/propgroups.hpp"
#include "propspec/workflow.hpp"

namespace py = pybind11;
using namespace propspec;

namespace {

py::object to_python(const nlohmann::json& doc) {
    return py::module_::import("json").attr("loads")(doc.dump());
}

nlohmann::json from_python(const py::object& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict record_dict(const PropertyRecord& r) {
    py::dict values;
    for (std::size_t i = 0; i < kAminoAcids.size(); ++i) values[py::str(std::string(1, kAminoAcids[i]))] = r.values[i];
    py::dict out;
    out["accession"] = r.accession;
    out["description"] = r.description;
    out["values"] = values;
    out["has_missing"] = r.has_missing;
    return out;
}

py::list prediction_rows(const EnsembleModel& ens, const BatchPrediction& batch) {
    py::list rows;
    for (const auto& row : batch.rows) {
        py::dict d;
        if (!row.ok()) {
            d["error"] = row.error;
            rows.append(d);
            continue;
        }
        d["prediction"] = row.value;
        if (ens.task == Task::Classification) {
            d["label"] = ens.class_names.at(static_cast<std::size_t>(row.value));
            d["scores"] = row.scores;
        } else {
            d["raw_prediction"] = row.raw_value;
        }
        rows.append(d);
    }
    return rows;
}

TrainResult train(const std::vector<std::string>& sequences, const std::vector<py::object>& targets,
                  const py::object& descriptor_table, const std::string& task, std::uint64_t seed, int k_folds,
                  double test_fraction, std::size_t max_models, const std::string& primary_metric, bool calibrate,
                  bool stratify, const std::string& residue_policy, int jobs) {
    if (sequences.size() != targets.size()) throw InvalidArgument("sequences and targets differ in length");
    // reuse the CSV reader so label handling matches the command-line tool
    std::string csv = "sequence,target\n";
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        std::string label = py::str(targets[i]).cast<std::string>();
        if (label.find_first_of(",\"\n") != std::string::npos) throw InvalidArgument("target contains a comma, quote or newline");
        csv += sequences[i] + "," + label + "\n";
    }
    TrainConfig cfg;
    cfg.task = parse_task(task);
    cfg.seed = seed;
    cfg.k_folds = k_folds;
    cfg.test_fraction = test_fraction;
    cfg.max_models = max_models;
    cfg.primary_metric = primary_metric;
    cfg.calibrate = calibrate;
    cfg.stratify = stratify;
    cfg.residue_policy = parse_residue_policy(residue_policy);
    cfg.jobs = jobs;
    const Dataset ds = parse_dataset(csv, DatasetSchema{}, cfg.task);
    const DescriptorTable table = descriptor_table_from_json(from_python(descriptor_table));
    py::gil_scoped_release release;
    return train_ensemble(ds, table, cfg);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral peptide encoding and ensemble models";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<DegenerateData>(m, "DegenerateData", base.ptr());

    m.def("parse_aaindex", [](const std::string& text) {
        py::list out;
        for (const auto& r : parse_aaindex(text)) out.append(record_dict(r));
        return out;
    }, py::arg("text"));

    m.def("derive_descriptors", [](const std::string& aaindex_path, double alpha) {
        const auto run = derive_descriptors(read_aaindex_file(aaindex_path), alpha, default_lexicon());
        return to_python(descriptor_table_to_json(run.table));
    }, py::arg("aaindex_path"), py::arg("alpha") = 0.05);

    m.def("fft_magnitude", [](const std::vector<double>& padded) { return fft_magnitude(padded); },
          py::arg("padded"));

    m.def("encode", [](const std::vector<std::string>& sequences, const py::object& descriptor_table,
                       std::optional<std::size_t> padded_length, const std::string& residue_policy) {
        const auto table = descriptor_table_from_json(from_python(descriptor_table));
        const auto policy = parse_residue_policy(residue_policy);
        const std::size_t p = padded_length.value_or(auto_padded_length(sequences, policy));
        return encode_batch(sequences, table.descriptors, p, policy);
    }, py::arg("sequences"), py::arg("descriptor_table"), py::arg("padded_length") = py::none(),
       py::arg("residue_policy") = "error");

    m.def("classification_metrics", [](const std::vector<double>& y_true, const std::vector<double>& y_pred,
                                       int num_classes) {
        return classification_metrics(y_true, y_pred, num_classes).values;
    }, py::arg("y_true"), py::arg("y_pred"), py::arg("num_classes") = 2);

    m.def("regression_metrics", [](const std::vector<double>& y_true, const std::vector<double>& y_pred) {
        return regression_metrics(y_true, y_pred).values;
    }, py::arg("y_true"), py::arg("y_pred"));

    py::class_<EnsembleModel>(m, "Ensemble")
        .def_static("load", &load_bundle, py::arg("path"))
        .def("save", [](const EnsembleModel& e, const std::string& path) { save_bundle(e, path); }, py::arg("path"))
        .def_property_readonly("task", [](const EnsembleModel& e) { return std::string(to_string(e.task)); })
        .def_property_readonly("class_names", [](const EnsembleModel& e) { return e.class_names; })
        .def_property_readonly("padded_length", [](const EnsembleModel& e) { return e.padded_length; })
        .def_property_readonly("size", [](const EnsembleModel& e) { return e.members.size(); })
        .def("predict", [](const EnsembleModel& e, const std::vector<std::string>& sequences, int jobs) {
            BatchPrediction batch;
            {
                py::gil_scoped_release release;
                batch = ensemble_predict(e, sequences, jobs);
            }
            return prediction_rows(e, batch);
        }, py::arg("sequences"), py::arg("jobs") = 1);

    py::class_<TrainResult>(m, "TrainResult")
        .def_property_readonly("ensemble", [](const TrainResult& r) { return r.ensemble; })
        .def("report", [](const TrainResult& r) { return to_python(r.report()); });

    m.def("train", &train, py::arg("sequences"), py::arg("targets"), py::arg("descriptor_table"),
          py::arg("task"), py::arg("seed"), py::arg("k_folds") = 5, py::arg("test_fraction") = 0.2,
          py::arg("max_models") = 0, py::arg("primary_metric") = "", py::arg("calibrate") = true,
          py::arg("stratify") = true, py::arg("residue_policy") = "error", py::arg("jobs") = 1);
}
