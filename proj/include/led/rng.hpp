#pragma once

#include <cstdint>
#include <random>

#include "led/error.hpp"

namespace led {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic random stream. fork(i) derives an independent stream from
/// the root seed and i alone, so per-item streams do not depend on how much
/// the parent has already drawn (or on which thread draws them).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    Rng fork(std::uint64_t stream) const {
        return Rng(mix64(seed_ ^ mix64(stream ^ 0xA5A5A5A5DEADBEEFull)));
    }

    std::uint64_t u64() { return eng_(); }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) { // inclusive bounds
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
    }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }

    // Strictly inside (0, 1); required by quantile transforms.
    double uniform_open01() {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        double u;
        do {
            u = d(eng_);
        } while (u <= 0.0 || u >= 1.0);
        return u;
    }

    double normal(double mu = 0.0, double sigma = 1.0) {
        return std::normal_distribution<double>(mu, sigma)(eng_);
    }

    std::int64_t poisson(double mean) {
        if (mean < 0.0) throw NumericError("poisson: negative mean");
        if (mean == 0.0) return 0;
        return std::poisson_distribution<std::int64_t>(mean)(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

} // namespace led
