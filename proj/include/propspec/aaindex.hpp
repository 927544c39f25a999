#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "propspec/amino_acids.hpp"

namespace propspec {

/// One AAIndex1 entry. `values` is in kAminoAcids order; a missing ("NA")
/// value is stored as quiet NaN and sets `has_missing`.
struct PropertyRecord {
    std::string accession;
    std::string description;
    ResidueValues values{};
    bool has_missing = false;

    double value(char residue) const;
};

/// Parses AAIndex1 flat-file text. Record order is preserved; multi-line
/// descriptions are joined with single spaces. Throws ParseError naming the
/// accession (or byte offset when no accession was seen) on malformed blocks.
std::vector<PropertyRecord> parse_aaindex(std::string_view text);

/// Reads and parses a file; throws Error if it cannot be opened.
std::vector<PropertyRecord> read_aaindex_file(const std::string& path);

/// Records with has_missing == false, order preserved.
std::vector<PropertyRecord> drop_incomplete(const std::vector<PropertyRecord>& records);

/// Debug writer producing AAIndex1 text that parse_aaindex reads back to the
/// same (accession, description, values). Only H, D and I lines are emitted.
std::string write_aaindex(const std::vector<PropertyRecord>& records);

} // namespace propspec
