#include "propspec/aaindex.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "propspec/error.hpp"

namespace propspec {
namespace {

// Column order of the two value lines following an "I" header.
constexpr std::array<char, 20> kFileOrder = {'A', 'R', 'N', 'D', 'C', 'Q', 'E', 'G', 'H', 'I',
                                             'L', 'K', 'M', 'F', 'P', 'S', 'T', 'W', 'Y', 'V'};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

struct Line {
    std::string_view text;
    std::size_t offset;
};

class BlockParser {
public:
    BlockParser(std::vector<Line> lines, std::size_t block_offset)
        : lines_(std::move(lines)), block_offset_(block_offset) {}

    PropertyRecord parse() {
        PropertyRecord rec;
        rec.values.fill(std::numeric_limits<double>::quiet_NaN());
        bool have_values = false;
        char current = 0;
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            const std::string_view line = lines_[i].text;
            if (line.empty()) continue;
            const char tag = line[0];
            const std::string_view body = line.size() > 2 ? line.substr(2) : std::string_view{};
            if (tag != ' ') current = tag;
            switch (tag) {
                case 'H':
                    rec.accession = std::string(trim(body));
                    break;
                case 'D':
                    rec.description = std::string(trim(body));
                    break;
                case 'I':
                    parse_values(rec, i);
                    have_values = true;
                    i += 2;
                    current = 'I';
                    break;
                case ' ':
                    if (current == 'D') {
                        const auto more = trim(line);
                        if (!more.empty()) {
                            if (!rec.description.empty()) rec.description += ' ';
                            rec.description += more;
                        }
                    }
                    break;
                default:
                    break;
            }
        }
        if (rec.accession.empty()) fail(rec, "missing H line");
        if (!have_values) fail(rec, "missing I line");
        return rec;
    }

private:
    [[noreturn]] void fail(const PropertyRecord& rec, const std::string& what) const {
        std::ostringstream msg;
        msg << "AAIndex parse error";
        if (!rec.accession.empty())
            msg << " in record " << rec.accession;
        else
            msg << " in record at byte offset " << block_offset_;
        msg << ": " << what;
        throw ParseError(msg.str());
    }

    void parse_values(PropertyRecord& rec, std::size_t header) {
        if (header + 2 >= lines_.size()) fail(rec, "I block needs two value lines");
        std::vector<std::string_view> tokens = split_ws(lines_[header + 1].text);
        const auto second = split_ws(lines_[header + 2].text);
        if (tokens.size() != 10 || second.size() != 10)
            fail(rec, "I block must hold two lines of 10 values");
        tokens.insert(tokens.end(), second.begin(), second.end());
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            const std::size_t slot = *residue_index(kFileOrder[k]);
            const std::string_view tok = tokens[k];
            if (tok == "NA") {
                rec.has_missing = true;
                continue;
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || ptr != tok.data() + tok.size())
                fail(rec, "bad numeric value '" + std::string(tok) + "'");
            rec.values[slot] = v;
        }
    }

    std::vector<Line> lines_;
    std::size_t block_offset_;
};

bool is_blank(const std::vector<Line>& lines) {
    for (const auto& l : lines)
        if (!trim(l.text).empty()) return false;
    return true;
}

} // namespace

double PropertyRecord::value(char residue) const {
    const auto idx = residue_index(residue);
    if (!idx) throw InvalidArgument(std::string("not a canonical residue: ") + residue);
    return values[*idx];
}

std::vector<PropertyRecord> parse_aaindex(std::string_view text) {
    std::vector<PropertyRecord> records;
    std::unordered_set<std::string> seen;
    std::vector<Line> block;
    std::size_t block_offset = 0;

    auto flush = [&] {
        if (!is_blank(block)) {
            PropertyRecord rec = BlockParser(std::move(block), block_offset).parse();
            if (!seen.insert(rec.accession).second)
                throw ParseError("AAIndex parse error: duplicate accession " + rec.accession);
            records.push_back(std::move(rec));
        }
        block.clear();
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line) == "//") {
            flush();
            block_offset = end + 1;
        } else {
            if (block.empty()) block_offset = pos;
            block.push_back({line, pos});
        }
        pos = end + 1;
    }
    flush();
    return records;
}

std::vector<PropertyRecord> read_aaindex_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open AAIndex file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_aaindex(buf.str());
}

std::vector<PropertyRecord> drop_incomplete(const std::vector<PropertyRecord>& records) {
    std::vector<PropertyRecord> out;
    out.reserve(records.size());
    for (const auto& r : records)
        if (!r.has_missing) out.push_back(r);
    return out;
}

std::string write_aaindex(const std::vector<PropertyRecord>& records) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& rec : records) {
        out << "H " << rec.accession << '\n';
        out << "D " << rec.description << '\n';
        out << "I    A/L     R/K     N/M     D/F     C/P     Q/S     E/T     G/W     H/Y     I/V\n";
        for (int row = 0; row < 2; ++row) {
            for (int col = 0; col < 10; ++col) {
                const double v = rec.values[*residue_index(kFileOrder[row * 10 + col])];
                out << ' ';
                if (std::isnan(v))
                    out << "NA";
                else
                    out << v;
            }
            out << '\n';
        }
        out << "//\n";
    }
    return out.str();
}

} // namespace propspec
