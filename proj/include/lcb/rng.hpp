#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace lcb {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw from a probability row using one uniform variate.
template <class Row>
int sample_index(const Row& probs, double u) {
    const Eigen::Index n = probs.size();
    double cum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cum += probs(i);
        if (u < cum) return static_cast<int>(i);
    }
    // Rounding left u above the final partial sum: take the last positive entry.
    for (Eigen::Index i = n - 1; i >= 0; --i)
        if (probs(i) > 0.0) return static_cast<int>(i);
    return static_cast<int>(n - 1);
}

}  // namespace lcb
