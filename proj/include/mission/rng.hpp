#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mission {

// Random stream algorithm, version 1. Every piece is fully specified so a
// seed reproduces the same draws on any conforming platform:
//   engine   std::mt19937_64 (output sequence fixed by the C++ standard)
//   seeding  engine seed = splitmix64(seed ^ splitmix64(stream + 1))
//   uniform  top 53 bits of one engine output scaled by 2^-53, in [0, 1)
//   index    rejection sampling on one engine output (no modulo bias)
//   normal   Box-Muller, cosine branch, one normal per two uniforms
// The std:: distribution classes are avoided on purpose: their algorithms
// are implementation-defined.
inline constexpr int kRngAlgorithmVersion = 1;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of independent sub-stream `stream` under master seed `seed`.
constexpr std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed ^ splitmix64(stream + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(derive_stream_seed(seed, stream)) {}

    std::uint64_t next() { return engine_(); }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = engine_();
            if (x >= threshold) return x % bound;
        }
    }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace mission
