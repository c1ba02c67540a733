#pragma once

#include <cmath>
#include <cstdint>

namespace deltagas::detail {

// splitmix64: per-path counter-based stream, identical on every platform
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // uniform in (0, 1]
    double uniform() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 s(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    s.next();
    return s.next();
}

// Box-Muller pair
struct NormalPair {
    double a, b;
};

inline NormalPair normal_pair(SplitMix64& rng) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

} // namespace deltagas::detail
