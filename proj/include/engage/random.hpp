#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace engage {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a stream index.
///
/// mix(seed, i) = splitmix64(seed ^ splitmix64(i)). Every sub-seed in the
/// project (per tree, per repeat, per simulated stream) goes through this
/// function, so parallel and sequential execution draw identical streams.
constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t index) noexcept
{
    return splitmix64(seed ^ splitmix64(index));
}

/// Seeded generator with portable distributions.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not; uniform and normal draws are done here so results
/// match across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound)
    {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = engine_();
        auto m = static_cast<unsigned __int128>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = engine_();
                m = static_cast<unsigned __int128>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (one draw per call, no caching).
    double normal()
    {
        double u1 = uniform01();
        while (u1 <= 0.0) {
            u1 = uniform01();
        }
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
};

} // namespace engage
