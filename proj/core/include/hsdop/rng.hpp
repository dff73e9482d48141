#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hsdop/complex.hpp"

namespace hsdop {

/// Uniform double in [0, 1) from the top 53 bits of one draw. Distribution
/// helpers below avoid std::*_distribution so streams are identical across
/// standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller (cosine branch; one draw discarded).
inline double normal01(std::mt19937_64& rng) {
    double u1 = std::max(uniform01(rng), 0x1.0p-53);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline Mat gaussian_mat(std::mt19937_64& rng, Eigen::Index rows,
                        Eigen::Index cols, double stddev) {
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = stddev * normal01(rng);
    return m;
}

inline Vec gaussian_vec(std::mt19937_64& rng, Eigen::Index n, double stddev) {
    return gaussian_mat(rng, n, 1, stddev);
}

} // namespace hsdop
