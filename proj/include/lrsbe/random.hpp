#pragma once

#include "lrsbe/types.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace lrsbe {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Stable across platforms, used for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a tuple of integers.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_gaussian(Rng& rng, double variance = 1.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline CMat complex_gaussian_matrix(Rng& rng, Index rows, Index cols, double variance = 1.0) {
    CMat out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) out(i, j) = complex_gaussian(rng, variance);
    return out;
}

inline CVec complex_gaussian_vector(Rng& rng, Index n, double variance = 1.0) {
    CVec out(n);
    for (Index i = 0; i < n; ++i) out(i) = complex_gaussian(rng, variance);
    return out;
}

} // namespace lrsbe
