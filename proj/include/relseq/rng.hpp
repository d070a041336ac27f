#pragma once

// Counter-based splitmix64 stream. Each output is a pure function of
// (seed, counter), so identical seeds give identical streams on every
// platform, and split() derives independent substreams for parallel work.
// Gaussians use Box-Muller on the raw uniforms instead of std::normal_distribution,
// whose output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "relseq/matrix.hpp"

namespace relseq {

namespace detail {

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        return detail::splitmix64_finalize(seed_ + (++counter_) * 0x9E3779B97F4A7C15ull);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1]; safe as the log argument in Box-Muller.
    double next_double_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via Box-Muller; consumes two uniforms per draw.
    double next_gaussian() {
        const double u1 = next_double_pos();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t next_below(std::uint64_t n) {
        // Modulo bias is negligible for n << 2^64.
        return next_u64() % n;
    }

    // Independent substream keyed by `stream`; parallel and serial use agree.
    Rng split(std::uint64_t stream) const {
        return Rng(detail::splitmix64_finalize(seed_ ^ (0xD1B54A32D192ED03ull * (stream + 1))));
    }

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

inline Matrix sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double std_dev) {
    if (std_dev < 0.0) throw std::invalid_argument("sample_gaussian: std must be >= 0");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = std_dev * rng.next_gaussian();
    return m;
}

// Deterministic Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_indices(Rng& rng, std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace relseq
