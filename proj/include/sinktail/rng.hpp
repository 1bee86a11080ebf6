#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "sinktail/types.hpp"

namespace sinktail {

// Counter-based generator used for all synthetic instances: splitmix64 on a
// (seed, tag, index) key, Box-Muller for normals. Instances are therefore a
// pure function of (seed, tag) and independent of draw order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fold_tag(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = splitmix64(seed ^ 0x5bf03635d78d672dULL);
    for (char c : tag) {
        h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    }
    return h;
}

// Uniform in [2^-53, 1); never exactly zero so log() below is finite.
inline double counter_uniform(std::uint64_t key) {
    const std::uint64_t bits = splitmix64(key);
    double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    if (u <= 0.0) u = 0x1.0p-53;
    return u;
}

// Standard normal for entry `index` of the stream (seed, tag).
inline double counter_normal(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    const std::uint64_t base = fold_tag(seed, tag);
    const double u1 = counter_uniform(base + 2 * index);
    const double u2 = counter_uniform(base + 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

template <class Scalar>
Matrix<Scalar> normal_matrix(std::uint64_t seed, std::string_view tag, Index rows, Index cols,
                             double scale = 1.0) {
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const std::uint64_t n = static_cast<std::uint64_t>(i * cols + j);
            m(i, j) = static_cast<Scalar>(scale * counter_normal(seed, tag, n));
        }
    }
    return m;
}

}  // namespace sinktail
