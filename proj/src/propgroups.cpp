#include "propspec/propgroups.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "propspec/error.hpp"
#include "propspec/log.hpp"
#include "propspec/random.hpp"
#include "propspec/stats.hpp"

namespace propspec {
namespace {

constexpr std::array<PropertyKeyword, kNumPropertyGroups> kAllKeywords = {
    PropertyKeyword::AlphaStructure, PropertyKeyword::BetaStructure,
    PropertyKeyword::Energy,         PropertyKeyword::Hydropathy,
    PropertyKeyword::Hydrophobicity, PropertyKeyword::OtherIndexes,
    PropertyKeyword::SecondaryStructure, PropertyKeyword::Volume,
};

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::size_t keyword_slot(PropertyKeyword k) { return static_cast<std::size_t>(k); }

} // namespace

std::string_view to_string(PropertyKeyword keyword) {
    switch (keyword) {
        case PropertyKeyword::AlphaStructure: return "alpha_structure";
        case PropertyKeyword::BetaStructure: return "beta_structure";
        case PropertyKeyword::Energy: return "energy";
        case PropertyKeyword::Hydropathy: return "hydropathy";
        case PropertyKeyword::Hydrophobicity: return "hydrophobicity";
        case PropertyKeyword::OtherIndexes: return "other_indexes";
        case PropertyKeyword::SecondaryStructure: return "secondary_structure";
        case PropertyKeyword::Volume: return "volume";
    }
    return "unknown";
}

PropertyKeyword parse_keyword(std::string_view text) {
    for (auto k : kAllKeywords)
        if (to_string(k) == text) return k;
    throw InvalidArgument("unknown property keyword '" + std::string(text) + "'");
}

std::string group_id_for(PropertyKeyword keyword) {
    const std::size_t n = keyword_slot(keyword) + 1;
    return "ID-0" + std::to_string(n);
}

double AminoAcidDescriptor::weight(char residue) const {
    const auto idx = residue_index(residue);
    if (!idx) throw InvalidArgument(std::string("not a canonical residue: ") + residue);
    return weights[*idx];
}

// ---------------------------------------------------------------------------

double ks_critical_value(double alpha, std::size_t n) {
    double c = 0.0;
    if (std::abs(alpha - 0.01) < 1e-12)
        c = 1.628;
    else if (std::abs(alpha - 0.05) < 1e-12)
        c = 1.358;
    else if (std::abs(alpha - 0.10) < 1e-12)
        c = 1.224;
    else
        throw InvalidArgument("KS alpha must be 0.01, 0.05 or 0.10");
    return c / std::sqrt(static_cast<double>(n));
}

std::vector<PropertyRecord> ks_normality_filter(const std::vector<PropertyRecord>& records,
                                                double alpha) {
    const double critical = ks_critical_value(alpha, kNumAminoAcids);
    std::vector<PropertyRecord> kept;
    for (const auto& rec : records) {
        if (rec.has_missing)
            throw InvariantViolation("KS filter needs complete records; " + rec.accession +
                                     " has missing values");
        const std::span<const double> values(rec.values);
        const double sd = stats::sample_stddev(values);
        if (!(sd > 0.0)) {
            logger()->info("dropping constant-valued property {}", rec.accession);
            continue;
        }
        const double m = stats::mean(values);
        std::array<double, kNumAminoAcids> z{};
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = (values[i] - m) / sd;
        if (stats::ks_statistic_normal(z) < critical) kept.push_back(rec);
    }
    return kept;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t count_distinct_rows(const Matrix& x) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) rows.emplace_back(x.row(i).begin(), x.row(i).end());
    std::sort(rows.begin(), rows.end());
    return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

} // namespace

ClusterPartition kmeans_cluster(const Matrix& vectors, int k, std::uint64_t seed) {
    const Eigen::Index n = vectors.rows();
    if (n == 0 || vectors.cols() == 0) throw InvalidArgument("k-means needs non-empty input");
    if (k < 2) throw InvalidArgument("k-means requires k >= 2");
    if (static_cast<std::size_t>(k) > count_distinct_rows(vectors))
        throw InvalidArgument("k exceeds the number of distinct vectors");

    Rng rng(seed);
    Matrix centers(k, vectors.cols());
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    centers.row(0) = vectors.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (vectors.row(i) - centers.row(c - 1)).squaredNorm());
            total += d2[i];
        }
        double target = rng.uniform() * total;
        Eigen::Index pick = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            target -= d2[i];
            if (target < 0.0 && d2[i] > 0.0) {
                pick = i;
                break;
            }
        }
        // guard against rounding leaving us on an existing center
        if (!(d2[pick] > 0.0))
            pick = static_cast<Eigen::Index>(std::max_element(d2.begin(), d2.end()) - d2.begin());
        centers.row(c) = vectors.row(pick);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (vectors.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        if (!changed) break;

        Matrix sums = Matrix::Zero(k, vectors.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[i]) += vectors.row(i);
            ++counts[labels[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centers.row(c) = sums.row(c) / counts[c];
                continue;
            }
            // empty cluster: reseed at the point farthest from its center
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = (vectors.row(i) - centers.row(labels[i])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            centers.row(c) = vectors.row(far);
            labels[far] = c;
        }
    }

    ClusterPartition out;
    out.labels = std::move(labels);
    out.k = k;
    try {
        out.score = calinski_harabasz(vectors, out.labels, k);
    } catch (const DegenerateData&) {
        out.score = std::numeric_limits<double>::infinity();
    }
    return out;
}

double calinski_harabasz(const Matrix& vectors, std::span<const int> labels, int k) {
    const Eigen::Index n = vectors.rows();
    if (k < 2) throw InvalidArgument("Calinski-Harabasz requires k >= 2");
    if (n <= k) throw InvalidArgument("Calinski-Harabasz requires n > k");
    if (labels.size() != static_cast<std::size_t>(n))
        throw InvalidArgument("label count does not match vector count");

    Matrix centroids = Matrix::Zero(k, vectors.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        if (c < 0 || c >= k) throw InvalidArgument("cluster label out of range");
        centroids.row(c) += vectors.row(i);
        counts[c] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0.0) throw InvalidArgument("every cluster needs at least one member");
        centroids.row(c) /= counts[c];
    }
    const Eigen::RowVectorXd global = vectors.colwise().mean();

    double between = 0.0;
    for (int c = 0; c < k; ++c) between += counts[c] * (centroids.row(c) - global).squaredNorm();
    double within = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        within += (vectors.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    if (!(within > 0.0)) throw DegenerateData("degenerate partition: within-cluster dispersion is zero");

    return (between / (k - 1)) / (within / static_cast<double>(n - k));
}

// ---------------------------------------------------------------------------

Lexicon default_lexicon() {
    using K = PropertyKeyword;
    return {
        {K::BetaStructure, {"weights for beta-sheet", "extended structure"}},
        {K::SecondaryStructure,
         {"window position", "helix termini", "preference value at", "turn", "coil", "bend",
          "chain reversal", "loop", "conformational state", "secondary structure", "aperiodic",
          "fractional occurrence", "linker", "zeta", "terminal", "theta(", "conformation",
          "helix end", "region"}},
        {K::Volume,
         {"volume", "chemical shift", "distance", "c-alpha", "alpha-carbon", "area", "accessib",
          "exposed", "surrounding"}},
        {K::Energy, {"free energy", "energies"}},
        {K::AlphaStructure, {"alpha", "helix", "helical"}},
        {K::BetaStructure, {"beta", "sheet", "strand", "bata"}},
        {K::Energy,
         {"energy", "thermodynamic", "entropy", "enthalpy", "heat", "gibbs", "stability",
          "melting", "delta g", "partition"}},
        {K::Hydropathy,
         {"hydropathy", "hydrophilic", "buried", "membrane", "polarity", "polar ", "pk-", "pk (",
          "isoelectric"}},
        {K::Hydrophobicity, {"hydrophob", "retention", "hplc", "lipophil"}},
        {K::Volume,
         {"size", "bulk", "weight", "radius", "length", "steric", "width", "surface", "polarizab",
          "refractiv", "contact", "bond", "graph", "eigenvalue", "atomic", "number of", "mass",
          "shape", "van der waals", "eccentricity", "diameter", "side chain", "interaction"}},
        {K::SecondaryStructure,
         {"frequency", "composition", "propensity", "preference", "occurrence", "distribution",
          "information", "indices", "index", "probability", "parameter", "flexibility",
          "mutability", "weights", "value", "scale", "ratio", "normalized", "compositino"}},
    };
}

nlohmann::json lexicon_to_json(const Lexicon& lexicon) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& rule : lexicon)
        rules.push_back({{"keyword", std::string(to_string(rule.keyword))}, {"patterns", rule.patterns}});
    return {{"rules", rules}};
}

Lexicon lexicon_from_json(const nlohmann::json& doc) {
    Lexicon out;
    try {
        for (const auto& rule : doc.at("rules")) {
            LexiconRule r;
            r.keyword = parse_keyword(rule.at("keyword").get<std::string>());
            for (const auto& p : rule.at("patterns")) r.patterns.push_back(lower(p.get<std::string>()));
            out.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid lexicon document: ") + e.what());
    }
    return out;
}

PropertyKeyword classify_description(std::string_view description, const Lexicon& lexicon) {
    const std::string text = lower(description);
    for (const auto& rule : lexicon)
        for (const auto& pattern : rule.patterns)
            if (text.find(lower(pattern)) != std::string::npos) return rule.keyword;
    return PropertyKeyword::OtherIndexes;
}

std::vector<PropertyGroup> assign_keyword_groups(const std::vector<PropertyRecord>& records,
                                                 const Lexicon& lexicon) {
    std::vector<PropertyGroup> groups;
    groups.reserve(kNumPropertyGroups);
    for (auto k : kAllKeywords) groups.push_back({group_id_for(k), k, {}});
    for (const auto& rec : records)
        groups[keyword_slot(classify_description(rec.description, lexicon))].members.push_back(rec);
    return groups;
}

// ---------------------------------------------------------------------------

PrincipalComponent first_principal_component(const Matrix& data) {
    const Eigen::Index rows = data.rows();
    const Eigen::Index cols = data.cols();
    if (rows < 2 || cols < 1) throw InvalidArgument("PCA needs at least 2 rows and 1 column");

    Matrix z = data;
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double m = z.col(j).mean();
        z.col(j).array() -= m;
        const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(rows - 1));
        if (!(sd > 0.0)) throw InvariantViolation("PCA input column " + std::to_string(j) + " is constant");
        z.col(j) /= sd;
    }
    const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(rows - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

    // Eigen returns ascending eigenvalues
    PrincipalComponent pc;
    pc.eigenvalues = solver.eigenvalues().reverse();
    for (Eigen::Index i = 0; i < pc.eigenvalues.size(); ++i)
        pc.eigenvalues[i] = std::max(0.0, pc.eigenvalues[i]);
    pc.direction = solver.eigenvectors().col(cols - 1);
    pc.scores = z * pc.direction;
    const double total = pc.eigenvalues.sum();
    pc.explained_variance = total > 0.0 ? pc.eigenvalues[0] / total : 0.0;
    return pc;
}

AminoAcidDescriptor group_pca_descriptor(const PropertyGroup& group) {
    if (group.members.size() < 2)
        throw InvalidArgument("group " + group.group_id + " needs at least 2 members for PCA");
    Matrix data(static_cast<Eigen::Index>(kNumAminoAcids), static_cast<Eigen::Index>(group.members.size()));
    AminoAcidDescriptor out;
    out.group_id = group.group_id;
    out.keyword = group.keyword;
    for (std::size_t j = 0; j < group.members.size(); ++j) {
        const auto& rec = group.members[j];
        if (rec.has_missing) throw InvariantViolation("PCA member " + rec.accession + " has missing values");
        for (std::size_t a = 0; a < kNumAminoAcids; ++a)
            data(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = rec.values[a];
        out.member_accessions.push_back(rec.accession);
    }
    PrincipalComponent pc = first_principal_component(data);
    const std::size_t alanine = *residue_index('A');
    const double sign = pc.scores[static_cast<Eigen::Index>(alanine)] < 0.0 ? -1.0 : 1.0;
    for (std::size_t a = 0; a < kNumAminoAcids; ++a)
        out.weights[a] = sign * pc.scores[static_cast<Eigen::Index>(a)];
    out.explained_variance = pc.explained_variance;
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json descriptor_table_to_json(const DescriptorTable& table) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : table.groups) {
        nlohmann::json entry;
        entry["group_id"] = g.group_id;
        entry["keyword"] = std::string(to_string(g.keyword));
        entry["member_accessions"] = g.member_accessions;
        const auto it = std::find_if(table.descriptors.begin(), table.descriptors.end(),
                                     [&](const AminoAcidDescriptor& d) { return d.group_id == g.group_id; });
        if (it == table.descriptors.end()) {
            entry["explained_variance"] = nullptr;
            entry["weights"] = nullptr;
            entry["status"] = "insufficient_members";
        } else {
            entry["explained_variance"] = it->explained_variance;
            nlohmann::json weights = nlohmann::json::object();
            for (std::size_t a = 0; a < kNumAminoAcids; ++a)
                weights[std::string(1, kAminoAcids[a])] = it->weights[a];
            entry["weights"] = weights;
            entry["status"] = "ok";
        }
        groups.push_back(std::move(entry));
    }
    return {{"schema_version", kDescriptorSchemaVersion}, {"groups", groups}};
}

DescriptorTable descriptor_table_from_json(const nlohmann::json& doc) {
    DescriptorTable table;
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kDescriptorSchemaVersion)
            throw ParseError("descriptor table schema_version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kDescriptorSchemaVersion) + ")");
        for (const auto& entry : doc.at("groups")) {
            GroupSummary g;
            g.group_id = entry.at("group_id").get<std::string>();
            g.keyword = parse_keyword(entry.at("keyword").get<std::string>());
            g.member_accessions = entry.at("member_accessions").get<std::vector<std::string>>();
            const auto& weights = entry.at("weights");
            if (!weights.is_null()) {
                AminoAcidDescriptor d;
                d.group_id = g.group_id;
                d.keyword = g.keyword;
                d.member_accessions = g.member_accessions;
                d.explained_variance = entry.at("explained_variance").get<double>();
                for (std::size_t a = 0; a < kNumAminoAcids; ++a)
                    d.weights[a] = weights.at(std::string(1, kAminoAcids[a])).get<double>();
                g.explained_variance = d.explained_variance;
                table.descriptors.push_back(std::move(d));
            }
            table.groups.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid descriptor table: ") + e.what());
    }
    if (table.descriptors.empty()) throw ParseError("descriptor table has no usable descriptors");
    return table;
}

DescriptorTable read_descriptor_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open descriptor table: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("descriptor table " + path + " is not valid JSON: " + e.what());
    }
    return descriptor_table_from_json(doc);
}

void write_descriptor_table(const DescriptorTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write descriptor table: " + path);
    out << descriptor_table_to_json(table).dump(2) << '\n';
}

DescriptorRun derive_descriptors(const std::vector<PropertyRecord>& records, double alpha,
                                 const Lexicon& lexicon) {
    DescriptorRun run;
    run.parsed = records.size();
    const auto complete = drop_incomplete(records);
    run.complete = complete.size();
    const auto normal = ks_normality_filter(complete, alpha);
    run.normal = normal.size();
    run.groups = assign_keyword_groups(normal, lexicon);
    for (const auto& g : run.groups) {
        GroupSummary summary{g.group_id, g.keyword, {}, std::nullopt};
        for (const auto& m : g.members) summary.member_accessions.push_back(m.accession);
        if (g.members.size() >= 2) {
            auto d = group_pca_descriptor(g);
            summary.explained_variance = d.explained_variance;
            run.table.descriptors.push_back(std::move(d));
        } else {
            logger()->warn("group {} ({}) has {} member(s); no descriptor produced", g.group_id,
                           to_string(g.keyword), g.members.size());
        }
        run.table.groups.push_back(std::move(summary));
    }
    return run;
}

} // namespace propspec
