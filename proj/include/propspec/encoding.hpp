#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "propspec/error.hpp"
#include "propspec/matrix.hpp"
#include "propspec/propgroups.hpp"

namespace propspec {

/// What to do with residues outside the 20 canonical codes.
enum class ResiduePolicy {
    Error,  ///< reject the sequence
    Skip,   ///< drop the residue
    Mean,   ///< substitute the mean of the 20 descriptor weights
};

std::string_view to_string(ResiduePolicy policy);
ResiduePolicy parse_residue_policy(std::string_view text);

struct EncodedSignal {
    std::string group_id;
    std::vector<double> samples;
    std::size_t original_length = 0;
};

struct SpectralFeatures {
    std::string group_id;
    std::vector<double> magnitudes;  ///< padded_length / 2 + 1 bins, DC first
    std::size_t padded_length = 0;
};

/// Thrown for residues rejected under ResiduePolicy::Error.
class UnsupportedResidue : public InvalidArgument {
public:
    UnsupportedResidue(char residue, std::size_t position);
    char residue() const noexcept { return residue_; }
    /// 1-based position in the input sequence.
    std::size_t position() const noexcept { return position_; }

private:
    char residue_;
    std::size_t position_;
};

EncodedSignal encode_sequence(std::string_view sequence, const AminoAcidDescriptor& descriptor,
                              ResiduePolicy policy = ResiduePolicy::Error);

/// Number of residues that survive `policy` (used to size the padding).
std::size_t encoded_length(std::string_view sequence, ResiduePolicy policy);

bool is_power_of_two(std::size_t n) noexcept;

/// Smallest power of two >= max(n, 2).
std::size_t next_power_of_two(std::size_t n) noexcept;

/// Signal samples followed by zeros up to `target` (a power of two >= length).
std::vector<double> zero_pad(const EncodedSignal& signal, std::size_t target);

/// |X_k| for k = 0..P/2 of the radix-2 FFT of a real signal of length P.
std::vector<double> fft_magnitude(std::span<const double> padded);

/// encode -> pad -> FFT for each descriptor, in descriptor order.
std::vector<SpectralFeatures> spectral_encode(std::string_view sequence,
                                              std::span<const AminoAcidDescriptor> descriptors,
                                              std::size_t padded_length,
                                              ResiduePolicy policy = ResiduePolicy::Error);

/// Per-group feature matrices for a batch of sequences: result[g] has one row
/// per sequence and padded_length / 2 + 1 columns. Throws on the first
/// sequence that cannot be encoded.
std::vector<Matrix> encode_batch(std::span<const std::string> sequences,
                                 std::span<const AminoAcidDescriptor> descriptors,
                                 std::size_t padded_length, ResiduePolicy policy);

/// Smallest power of two >= the longest encodable sequence.
std::size_t auto_padded_length(std::span<const std::string> sequences, ResiduePolicy policy);

/// CSV with header g{1..G}_bin{k}; rows follow sequence order.
void write_feature_csv(std::ostream& out, std::span<const Matrix> groups);

/// One JSON header line {padded_length, groups, n_rows, n_cols, dtype}
/// followed by n_rows * n_cols little-endian float64 values, row-major,
/// groups concatenated within each row.
void write_feature_binary(std::ostream& out, std::span<const Matrix> groups,
                          std::span<const std::string> group_ids, std::size_t padded_length);

} // namespace propspec
