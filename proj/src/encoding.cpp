#include "propspec/encoding.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "propspec/error.hpp"

namespace propspec {

std::string_view to_string(ResiduePolicy policy) {
    switch (policy) {
        case ResiduePolicy::Error: return "error";
        case ResiduePolicy::Skip: return "skip";
        case ResiduePolicy::Mean: return "mean";
    }
    return "error";
}

ResiduePolicy parse_residue_policy(std::string_view text) {
    if (text == "error") return ResiduePolicy::Error;
    if (text == "skip") return ResiduePolicy::Skip;
    if (text == "mean") return ResiduePolicy::Mean;
    throw InvalidArgument("unknown residue policy '" + std::string(text) + "' (expected error, skip or mean)");
}

UnsupportedResidue::UnsupportedResidue(char residue, std::size_t position)
    : InvalidArgument("unsupported residue '" + std::string(1, residue) + "' at position " +
                      std::to_string(position)),
      residue_(residue),
      position_(position) {}

EncodedSignal encode_sequence(std::string_view sequence, const AminoAcidDescriptor& descriptor,
                              ResiduePolicy policy) {
    if (sequence.empty()) throw InvalidArgument("cannot encode an empty sequence");
    EncodedSignal out;
    out.group_id = descriptor.group_id;
    out.samples.reserve(sequence.size());
    double mean_weight = 0.0;
    for (double w : descriptor.weights) mean_weight += w;
    mean_weight /= static_cast<double>(kNumAminoAcids);

    for (std::size_t i = 0; i < sequence.size(); ++i) {
        const auto idx = residue_index(sequence[i]);
        if (idx) {
            out.samples.push_back(descriptor.weights[*idx]);
            continue;
        }
        switch (policy) {
            case ResiduePolicy::Error: throw UnsupportedResidue(sequence[i], i + 1);
            case ResiduePolicy::Skip: break;
            case ResiduePolicy::Mean: out.samples.push_back(mean_weight); break;
        }
    }
    if (out.samples.empty()) throw InvalidArgument("no encodable residues in sequence");
    out.original_length = out.samples.size();
    return out;
}

std::size_t encoded_length(std::string_view sequence, ResiduePolicy policy) {
    if (policy != ResiduePolicy::Skip) return sequence.size();
    std::size_t n = 0;
    for (char c : sequence)
        if (residue_index(c)) ++n;
    return n;
}

bool is_power_of_two(std::size_t n) noexcept { return std::has_single_bit(n); }

std::size_t next_power_of_two(std::size_t n) noexcept { return std::bit_ceil(std::max<std::size_t>(n, 2)); }

std::vector<double> zero_pad(const EncodedSignal& signal, std::size_t target) {
    if (!is_power_of_two(target)) throw InvalidArgument("padding target must be a power of two");
    if (target < signal.samples.size())
        throw InvalidArgument("sequence of length " + std::to_string(signal.samples.size()) +
                              " exceeds padded length " + std::to_string(target));
    std::vector<double> out(signal.samples);
    out.resize(target, 0.0);
    return out;
}

std::vector<double> fft_magnitude(std::span<const double> padded) {
    const std::size_t n = padded.size();
    if (n < 2 || !is_power_of_two(n))
        throw InvalidArgument("FFT length must be a power of two >= 2, got " + std::to_string(n));

    std::vector<std::complex<double>> a(padded.begin(), padded.end());
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const double step = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t k = 0; k < half; ++k) {
            // exact twiddles from the angle avoid drift on long transforms
            const std::complex<double> w = std::polar(1.0, step * static_cast<double>(k));
            for (std::size_t start = 0; start < n; start += len) {
                const auto u = a[start + k];
                const auto v = a[start + k + half] * w;
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
    std::vector<double> mags(n / 2 + 1);
    for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(a[k]);
    return mags;
}

std::vector<SpectralFeatures> spectral_encode(std::string_view sequence,
                                              std::span<const AminoAcidDescriptor> descriptors,
                                              std::size_t padded_length, ResiduePolicy policy) {
    std::vector<SpectralFeatures> out;
    out.reserve(descriptors.size());
    for (const auto& d : descriptors) {
        const EncodedSignal signal = encode_sequence(sequence, d, policy);
        out.push_back({d.group_id, fft_magnitude(zero_pad(signal, padded_length)), padded_length});
    }
    return out;
}

std::vector<Matrix> encode_batch(std::span<const std::string> sequences,
                                 std::span<const AminoAcidDescriptor> descriptors,
                                 std::size_t padded_length, ResiduePolicy policy) {
    const auto bins = static_cast<Eigen::Index>(padded_length / 2 + 1);
    std::vector<Matrix> out(descriptors.size(), Matrix(static_cast<Eigen::Index>(sequences.size()), bins));
    for (std::size_t r = 0; r < sequences.size(); ++r) {
        const auto features = spectral_encode(sequences[r], descriptors, padded_length, policy);
        for (std::size_t g = 0; g < features.size(); ++g)
            for (Eigen::Index k = 0; k < bins; ++k)
                out[g](static_cast<Eigen::Index>(r), k) = features[g].magnitudes[static_cast<std::size_t>(k)];
    }
    return out;
}

std::size_t auto_padded_length(std::span<const std::string> sequences, ResiduePolicy policy) {
    std::size_t longest = 0;
    for (const auto& s : sequences) longest = std::max(longest, encoded_length(s, policy));
    return next_power_of_two(longest);
}

void write_feature_csv(std::ostream& out, std::span<const Matrix> groups) {
    if (groups.empty()) return;
    bool first = true;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (Eigen::Index k = 0; k < groups[g].cols(); ++k) {
            out << (first ? "" : ",") << 'g' << (g + 1) << "_bin" << k;
            first = false;
        }
    out << '\n';
    const auto old_precision = out.precision(17);
    for (Eigen::Index r = 0; r < groups[0].rows(); ++r) {
        first = true;
        for (const auto& m : groups)
            for (Eigen::Index k = 0; k < m.cols(); ++k) {
                out << (first ? "" : ",") << m(r, k);
                first = false;
            }
        out << '\n';
    }
    out.precision(old_precision);
}

void write_feature_binary(std::ostream& out, std::span<const Matrix> groups,
                          std::span<const std::string> group_ids, std::size_t padded_length) {
    static_assert(std::endian::native == std::endian::little, "binary writer assumes little-endian");
    const Eigen::Index rows = groups.empty() ? 0 : groups[0].rows();
    Eigen::Index cols = 0;
    for (const auto& m : groups) cols += m.cols();
    nlohmann::json header = {{"padded_length", padded_length},
                             {"groups", std::vector<std::string>(group_ids.begin(), group_ids.end())},
                             {"n_rows", rows},
                             {"n_cols", cols},
                             {"dtype", "float64le"}};
    out << header.dump() << '\n';
    for (Eigen::Index r = 0; r < rows; ++r)
        for (const auto& m : groups)
            for (Eigen::Index k = 0; k < m.cols(); ++k) {
                const double v = m(r, k);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
}

} // namespace propspec
