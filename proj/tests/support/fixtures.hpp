#pragma once

#include "lcb/model.hpp"
#include "lcb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lcb::test {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = lo + (hi - lo) * uniform01(rng);
    return m;
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    return random_matrix(rng, n, 1, lo, hi).col(0);
}

/// Random PSD matrix of the given rank.
inline Matrix random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank) {
    const Matrix b = random_matrix(rng, n, rank);
    return b * b.transpose();
}

/// Random model with non-uniform g (L = 1 / min g) and features scaled so
/// every |<phi, theta>| <= bound for the returned theta.
struct RandomInstance {
    FiniteContextModel model;
    Vector theta;
};

inline RandomInstance random_instance(Rng& rng, int S, int K, int d, double bound = 0.9) {
    std::vector<double> g(static_cast<std::size_t>(S));
    double total = 0.0;
    for (double& v : g) {
        v = 0.5 + uniform01(rng);
        total += v;
    }
    double gmin = 1.0;
    for (double& v : g) {
        v /= total;
        gmin = std::min(gmin, v);
    }
    // Exact renormalisation keeps the sum within 1e-12.
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) sum += g[i];
    g.back() = 1.0 - sum;
    gmin = *std::min_element(g.begin(), g.end());

    Matrix features = random_matrix(rng, d, static_cast<Eigen::Index>(S) * K);
    Vector theta = random_vector(rng, d);
    const double peak = (features.transpose() * theta).cwiseAbs().maxCoeff();
    features *= bound / peak;
    const double L = std::max(static_cast<double>(S), 1.0 / gmin) * (1.0 + 1e-12);
    return {FiniteContextModel(S, K, d, g, L, std::move(features)), theta};
}

}  // namespace lcb::test
