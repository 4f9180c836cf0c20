#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "anonphy/numerics.hpp"

namespace anonphy {

/// Name recorded in run manifests and channel dumps.
inline constexpr const char* kRngIdentity = "mt19937_64 seeded per substream by splitmix64(seed, stream path)";

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent engine for a path of stream indices, e.g. {point, block}.
/// The result depends only on (seed, path), so blocks can run in any order.
inline Engine substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = seed;
    std::uint64_t key = splitmix64(state);
    for (std::uint64_t p : path) {
        state = key ^ (p * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL);
        key = splitmix64(state);
    }
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

/// Circularly symmetric complex Gaussian with E|z|^2 = variance.
inline cdouble cscg(Engine& rng, double variance = 1.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline ComplexMatrix cscg_matrix(Engine& rng, Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
    ComplexMatrix m(rows, cols);
    // Row-major fill order so dumps and draws line up.
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = cscg(rng, variance);
    return m;
}

inline int uniform_index(Engine& rng, int n) {
    std::uniform_int_distribution<int> d(0, n - 1);
    return d(rng);
}

}  // namespace anonphy
