#include "propspec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "propspec/csv.hpp"
#include "propspec/error.hpp"
#include "propspec/log.hpp"
#include "propspec/random.hpp"

namespace propspec {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

bool is_missing(std::string_view v) {
    return v.empty() || v == "NA" || v == "NaN" || v == "nan" || v == "NAN" || v == "null" || v == "None";
}

std::size_t column_index(const csv::Row& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidArgument("dataset is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

void warn_conflicting_duplicates(const Dataset& ds) {
    std::unordered_map<std::string, double> first_target;
    std::vector<std::string> conflicts;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto [it, inserted] = first_target.emplace(ds.sequences[i], ds.targets[i]);
        if (!inserted && it->second != ds.targets[i]) conflicts.push_back(ds.sequences[i]);
    }
    if (conflicts.empty()) return;
    std::sort(conflicts.begin(), conflicts.end());
    conflicts.erase(std::unique(conflicts.begin(), conflicts.end()), conflicts.end());
    std::string list;
    for (std::size_t i = 0; i < conflicts.size() && i < 10; ++i) list += (i ? ", " : "") + conflicts[i];
    if (conflicts.size() > 10) list += ", ...";
    logger()->warn("{} duplicate sequence(s) with conflicting targets kept: {}", conflicts.size(), list);
}

} // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.task = task;
    out.class_names = class_names;
    out.sequences.reserve(indices.size());
    out.targets.reserve(indices.size());
    for (std::size_t i : indices) {
        out.sequences.push_back(sequences.at(i));
        out.targets.push_back(targets.at(i));
    }
    return out;
}

Dataset parse_dataset(std::string_view csv_text, const DatasetSchema& schema, Task task) {
    const auto rows = csv::parse(csv_text);
    if (rows.empty()) throw InvalidArgument("dataset has no header row");
    const std::size_t seq_col = column_index(rows[0], schema.sequence_column);
    const std::size_t target_col = column_index(rows[0], schema.target_column);

    Dataset ds;
    ds.task = task;
    std::map<std::string, std::size_t> class_ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string seq = seq_col < row.size() ? trim(row[seq_col]) : std::string{};
        const std::string target = target_col < row.size() ? trim(row[target_col]) : std::string{};
        if (seq.empty() || is_missing(target)) {
            ++ds.dropped_count;
            continue;
        }
        if (task == Task::Regression) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(target.data(), target.data() + target.size(), v);
            if (ec != std::errc{} || ptr != target.data() + target.size())
                throw ParseError("row " + std::to_string(r + 1) + ": target '" + target + "' is not numeric");
            if (!std::isfinite(v)) {
                ++ds.dropped_count;
                continue;
            }
            ds.targets.push_back(v);
        } else {
            const auto [it, inserted] = class_ids.emplace(target, ds.class_names.size());
            if (inserted) ds.class_names.push_back(target);
            ds.targets.push_back(static_cast<double>(it->second));
        }
        ds.sequences.push_back(seq);
    }
    if (ds.size() == 0) throw InvalidArgument("dataset has no usable rows after cleaning");
    if (ds.dropped_count > 0) logger()->info("dropped {} row(s) with missing values", ds.dropped_count);
    warn_conflicting_duplicates(ds);
    return ds;
}

Dataset load_dataset(const std::string& path, const DatasetSchema& schema, Task task) {
    return parse_dataset(csv::read_file(path), schema, task);
}

SplitIndices split_indices(const Dataset& ds, double test_fraction, std::uint64_t seed, bool stratify) {
    const std::size_t n = ds.size();
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in (0, 1)");
    if (n < 2) throw InvalidArgument("need at least 2 rows to split");

    auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    total_test = std::clamp<std::size_t>(total_test, 1, n - 1);

    Rng rng(seed);
    SplitIndices out;
    if (!stratify || ds.task != Task::Classification) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span(order));
        out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(total_test));
        out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(total_test), order.end());
    } else {
        const std::size_t k = std::max<std::size_t>(ds.num_classes(), 1);
        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(ds.targets[i])].push_back(i);

        std::vector<std::size_t> quota(k, 0);
        std::vector<double> remainder(k, -1.0);
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < k; ++c) {
            if (members[c].size() == 1) {
                logger()->warn("class '{}' has a single member; it is kept in the training split",
                               c < ds.class_names.size() ? ds.class_names[c] : std::to_string(c));
                continue;
            }
            const double exact = static_cast<double>(members[c].size()) * test_fraction;
            quota[c] = static_cast<std::size_t>(std::floor(exact));
            remainder[c] = exact - std::floor(exact);
            assigned += quota[c];
        }
        std::vector<std::size_t> by_remainder(k);
        std::iota(by_remainder.begin(), by_remainder.end(), 0);
        std::stable_sort(by_remainder.begin(), by_remainder.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t c : by_remainder) {
            if (assigned >= total_test) break;
            if (remainder[c] < 0.0 || quota[c] + 1 >= members[c].size()) continue;
            ++quota[c];
            ++assigned;
        }
        for (std::size_t c = 0; c < k; ++c) {
            rng.shuffle(std::span(members[c]));
            for (std::size_t j = 0; j < members[c].size(); ++j)
                (j < quota[c] ? out.test : out.train).push_back(members[c][j]);
        }
        rng.shuffle(std::span(out.train));
        rng.shuffle(std::span(out.test));
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed,
                                          bool stratify) {
    const auto idx = split_indices(ds, test_fraction, seed, stratify);
    return {ds.subset(idx.train), ds.subset(idx.test)};
}

MinMaxScaler fit_minmax(const Matrix& features) {
    if (features.rows() == 0) throw InvalidArgument("cannot fit a scaler on zero rows");
    return {features.colwise().minCoeff().transpose(), features.colwise().maxCoeff().transpose()};
}

Matrix apply_minmax(const MinMaxScaler& scaler, const Matrix& features) {
    if (features.cols() != scaler.dimension())
        throw InvalidArgument("scaler fitted on " + std::to_string(scaler.dimension()) + " features, got " +
                              std::to_string(features.cols()));
    Matrix out(features.rows(), features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        const double lo = scaler.min[j];
        const double range = scaler.max[j] - lo;
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            out(i, j) = range > 0.0 ? std::clamp((features(i, j) - lo) / range, 0.0, 1.0) : 0.0;
        }
    }
    return out;
}

} // namespace propspec
