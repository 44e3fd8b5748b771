#pragma once

#include <cmath>
#include <cstdint>

namespace boxfit {

// Counter-based PRNG (splitmix64 finalizer over seed + counter). Output is
// a pure function of (seed, counter), so substreams are reproducible no
// matter in which order they are drawn from.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    // Independent stream derived from this seed; stable across draws.
    Rng substream(std::uint64_t stream) const {
        return Rng(mix(seed_ ^ mix(stream + 0x9E3779B97F4A7C15ull)));
    }

    std::uint64_t next_u64() {
        return mix(seed_ + 0x9E3779B97F4A7C15ull * ++counter_);
    }

    // Uniform in [0,1).
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = std::uint64_t(hi - lo) + 1;
        return lo + std::int64_t(next_u64() % span);
    }

    // Standard normal via Box-Muller (the cosine leg is kept as a spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace boxfit
