#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace propspec {

/// Seeded generator whose derived draws are identical on every platform.
/// The std distributions are implementation-defined, so they are avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n); n > 0.
    std::uint64_t index(std::uint64_t n) {
        // Lemire's nearly-divisionless method
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal draw (Box-Muller, no cached second value).
    double normal();

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i)
            std::swap(values[i - 1], values[index(i)]);
    }

    /// Child seed for an independent stream, e.g. one per tree.
    std::uint64_t split() { return engine_() ^ 0x9E3779B97F4A7C15ULL; }

private:
    std::mt19937_64 engine_;
};

} // namespace propspec
