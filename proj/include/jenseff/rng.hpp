#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace jenseff {

/// Seeded random stream with uniform and Gaussian draws.
///
/// Gaussian variates come from Box-Muller on top of mt19937_64 rather than
/// std::normal_distribution, whose output is implementation-defined;
/// identical seeds give identical streams on every platform. Seeds pass
/// through SplitMix64 first: raw sequential seeds produce visibly correlated
/// mt19937_64 streams (its seed initialization has weak avalanche).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    /// Derives an independent stream for a sub-task of a seeded run.
    static Rng split(std::uint64_t seed, std::uint64_t salt) {
        return Rng(seed ^ (0x9E3779B97F4A7C15ULL + (salt << 1)));
    }

    /// Uniform on (0, 1].
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace jenseff
