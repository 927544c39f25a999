#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace propspec::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
/// newlines. Blank lines are skipped. Throws ParseError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);

std::string read_file(const std::string& path);

} // namespace propspec::csv
