#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace propspec {

inline constexpr std::size_t kNumAminoAcids = 20;

/// Canonical one-letter codes in alphabetical order; every per-residue
/// array in the library is indexed in this order.
inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";

/// Index of a residue in kAminoAcids (case-insensitive), or nullopt for
/// non-canonical codes.
constexpr std::optional<std::size_t> residue_index(char c) noexcept {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    for (std::size_t i = 0; i < kAminoAcids.size(); ++i)
        if (kAminoAcids[i] == c) return i;
    return std::nullopt;
}

using ResidueValues = std::array<double, kNumAminoAcids>;

} // namespace propspec
