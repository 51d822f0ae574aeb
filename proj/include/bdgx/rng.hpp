#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bdgx {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a785971587c9ULL;
    return z ^ (z >> 31);
}

/// Seedable random stream. All stochastic operations in the library draw from
/// an explicit Rng so that every result is a pure function of (inputs, seed).
/// Distributions are implemented on top of the raw engine output instead of
/// <random> distribution objects, which are not bit-reproducible across
/// standard library implementations.
class Rng {
public:
    Rng() : Rng(0x5eedULL) {}

    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        engine_.seed(splitmix64(s));
    }

    std::uint64_t seed() const { return seed_; }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent child stream. The derivation depends only on the
    /// construction seed and the stream id, never on how much the parent has
    /// drawn, so per-sample streams are stable under any work partitioning.
    Rng child(std::uint64_t stream_id) const {
        std::uint64_t s = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
        return Rng(splitmix64(s));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace bdgx
