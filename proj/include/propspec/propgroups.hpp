#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "propspec/aaindex.hpp"
#include "propspec/amino_acids.hpp"
#include "propspec/matrix.hpp"

namespace propspec {

/// The eight property keywords, in group-id order (ID-01 .. ID-08).
enum class PropertyKeyword {
    AlphaStructure,
    BetaStructure,
    Energy,
    Hydropathy,
    Hydrophobicity,
    OtherIndexes,
    SecondaryStructure,
    Volume,
};

inline constexpr std::size_t kNumPropertyGroups = 8;

std::string_view to_string(PropertyKeyword keyword);
PropertyKeyword parse_keyword(std::string_view text);
std::string group_id_for(PropertyKeyword keyword);

struct PropertyGroup {
    std::string group_id;
    PropertyKeyword keyword{};
    std::vector<PropertyRecord> members;
};

/// First principal component of a property group, expressed per residue.
struct AminoAcidDescriptor {
    std::string group_id;
    PropertyKeyword keyword{};
    ResidueValues weights{};
    double explained_variance = 0.0;
    std::vector<std::string> member_accessions;

    double weight(char residue) const;
};

struct ClusterPartition {
    std::vector<int> labels;
    int k = 0;
    /// Calinski-Harabasz index; +inf when the within-cluster dispersion is zero.
    double score = 0.0;
};

// ---------------------------------------------------------------------------
// Normality filter

/// Asymptotic one-sample KS critical value c(alpha) / sqrt(n).
/// alpha must be one of 0.01, 0.05, 0.10.
double ks_critical_value(double alpha, std::size_t n);

/// Keeps records whose standardized values pass the KS normality test at
/// `alpha`. Zero-variance records are dropped with a warning.
std::vector<PropertyRecord> ks_normality_filter(const std::vector<PropertyRecord>& records,
                                                double alpha);

// ---------------------------------------------------------------------------
// Clustering demo

/// Lloyd's algorithm with k-means++ seeding. Rows of `vectors` are points.
/// Requires 2 <= k <= number of distinct rows.
ClusterPartition kmeans_cluster(const Matrix& vectors, int k, std::uint64_t seed);

/// [B / (k - 1)] / [W / (n - k)]. Throws DegenerateData when W == 0.
double calinski_harabasz(const Matrix& vectors, std::span<const int> labels, int k);

// ---------------------------------------------------------------------------
// Keyword grouping

/// One lexicon rule: a description matching any pattern (case-insensitive
/// substring) is assigned `keyword`. Rules are tried in order.
struct LexiconRule {
    PropertyKeyword keyword{};
    std::vector<std::string> patterns;
};

using Lexicon = std::vector<LexiconRule>;

/// The shipped lexicon; ordered so that narrow structural phrases win over
/// the broad single-word keywords.
Lexicon default_lexicon();

nlohmann::json lexicon_to_json(const Lexicon& lexicon);
Lexicon lexicon_from_json(const nlohmann::json& doc);

/// First matching keyword, or OtherIndexes when nothing matches.
PropertyKeyword classify_description(std::string_view description, const Lexicon& lexicon);

/// Exactly eight groups, ID-01..ID-08, possibly empty.
std::vector<PropertyGroup> assign_keyword_groups(const std::vector<PropertyRecord>& records,
                                                 const Lexicon& lexicon);

// ---------------------------------------------------------------------------
// PCA descriptor

struct PrincipalComponent {
    Vector scores;          ///< projection of each row onto the component
    Vector direction;       ///< unit eigenvector (length = columns)
    Vector eigenvalues;     ///< all eigenvalues, descending
    double explained_variance = 0.0;
};

/// Leading principal component of `data` after scaling every column to zero
/// mean and unit sample variance. Throws InvariantViolation on a constant
/// column.
PrincipalComponent first_principal_component(const Matrix& data);

/// Descriptor for a group with >= 2 complete members. The sign is chosen so
/// that the Alanine weight is non-negative.
AminoAcidDescriptor group_pca_descriptor(const PropertyGroup& group);

// ---------------------------------------------------------------------------
// Descriptor table (the contract between descriptor generation and encoding)

inline constexpr int kDescriptorSchemaVersion = 1;

struct GroupSummary {
    std::string group_id;
    PropertyKeyword keyword{};
    std::vector<std::string> member_accessions;
    std::optional<double> explained_variance;  ///< empty when the group was flagged
};

struct DescriptorTable {
    std::vector<GroupSummary> groups;              ///< all eight groups
    std::vector<AminoAcidDescriptor> descriptors;  ///< usable groups only, ID order
};

nlohmann::json descriptor_table_to_json(const DescriptorTable& table);
DescriptorTable descriptor_table_from_json(const nlohmann::json& doc);
DescriptorTable read_descriptor_table(const std::string& path);
void write_descriptor_table(const DescriptorTable& table, const std::string& path);

struct DescriptorRun {
    std::size_t parsed = 0;
    std::size_t complete = 0;
    std::size_t normal = 0;
    std::vector<PropertyGroup> groups;
    DescriptorTable table;
};

/// Full descriptor derivation: drop incomplete records, KS filter, keyword
/// grouping, then one PCA descriptor per group with >= 2 members.
DescriptorRun derive_descriptors(const std::vector<PropertyRecord>& records, double alpha,
                                 const Lexicon& lexicon);

} // namespace propspec
