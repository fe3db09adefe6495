#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace handrem {

/// Seeded generator with platform-independent output. The standard
/// distributions are implementation-defined, so the mappings to uniform and
/// normal variates are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection keeps the result unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = 0;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (hasSpare_) {
            hasSpare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(t);
        hasSpare_ = true;
        return r * std::cos(t);
    }
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool hasSpare_ = false;
};

} // namespace handrem
