#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "guide/normal.hpp"

namespace guide {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from (base, stream). Used everywhere a
/// unit of work (dataset row, ensemble member, MC chunk) needs its own RNG so
/// results do not depend on worker count or execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    s ^= 0x9e3779b97f4a7c15ULL * (stream + 0x632be59bd9b4e019ULL);
    std::uint64_t out = splitmix64(s);
    out ^= splitmix64(s);
    return out;
}

/// Deterministic random stream. All draws are built from raw 64-bit outputs of
/// mt19937_64 (no std::*_distribution), so traces are reproducible across
/// standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the inverse CDF; tails truncated at ~|z| = 8.2.
    double normal() { return normal_quantile(uniform()); }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    /// Uniform integer in [0, n), n >= 1 (Lemire multiply-shift).
    std::size_t index(std::size_t n) {
        const unsigned __int128 m = static_cast<unsigned __int128>(gen_()) * n;
        return static_cast<std::size_t>(m >> 64);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace guide
