#ifndef CATBN_RANDOM_HPP
#define CATBN_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace catbn {

using Rng = std::mt19937_64;

/// Uniform in [0, 1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

/// Inverse-CDF draw from unnormalized weights.
inline int sample_categorical(Rng& rng, std::span<const double> p) {
    double total = 0.0;
    for (double x : p) total += x;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (u < p[i]) return static_cast<int>(i);
        u -= p[i];
    }
    for (std::size_t i = p.size(); i-- > 0;)
        if (p[i] > 0.0) return static_cast<int>(i);
    return 0;
}

/// Symmetric Dirichlet(1) sample: normalized Exp(1) variates.
inline void sample_flat_dirichlet(Rng& rng, std::span<double> out) {
    double total = 0.0;
    for (double& x : out) {
        x = -std::log1p(-uniform01(rng)) + 1e-12;
        total += x;
    }
    for (double& x : out) x /= total;
}

/// Derives an independent stream seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace catbn

#endif
