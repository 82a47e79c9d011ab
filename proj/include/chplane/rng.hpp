#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace chplane {

/// Counter-based SplitMix64 generator.
///
/// The n-th output is a pure function of (seed, n), so a stream can be
/// reproduced in any language from the seed alone. Distribution helpers
/// below are defined in terms of `next()` only; no std:: distributions are
/// used because their algorithms differ between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Derive an independent seed for a sub-stream (e.g. per bin, per fold).
    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept {
        return mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL));
    }

    std::uint64_t next() noexcept {
        ++counter_;
        return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % bound;
    }

    /// Standard normal via Box-Muller (one value per two uniforms).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace chplane
