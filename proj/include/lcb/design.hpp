#pragma once

// G-optimal exploration designs. Each context gets a Kiefer-Wolfowitz design
// over its arm features, computed by Frank-Wolfe (Fedorov-Wynn) iterations
// on the log-det objective restricted to the span of the features. The
// mixture over contexts then fixes the exploration constant lambda.

#include "lcb/covariance.hpp"
#include "lcb/model.hpp"
#include "lcb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lcb {

class DegenerateDesign : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DesignResult {
    Vector weights;
    double max_leverage = 0.0;
    int span_dim = 0;
    int iterations = 0;
    std::vector<double> logdet_history;
};

inline constexpr double kDefaultDesignEps = 1e-3;
inline constexpr int kDefaultDesignMaxIter = 200000;

/// vectors: d x n, one candidate per column.
inline DesignResult g_optimal_design(const Matrix& vectors, double eps = kDefaultDesignEps,
                                     int max_iter = kDefaultDesignMaxIter) {
    if (!(eps > 0.0)) throw ContractViolation("g_optimal_design: eps must be positive");
    const Eigen::Index d = vectors.rows();
    const Eigen::Index n = vectors.cols();
    if (n == 0 || vectors.cwiseAbs().maxCoeff() == 0.0)
        throw DegenerateDesign("g_optimal_design: all candidate vectors are zero");

    // Orthonormal basis of the span; the design lives in those coordinates.
    const Matrix gram = vectors * vectors.transpose();
    const SymEig eig = sym_eig(0.5 * (gram + gram.transpose()));
    const double cutoff = kDefaultPinvTol * eig.eigenvalues(0);
    Eigen::Index rank = 0;
    while (rank < d && eig.eigenvalues(rank) > cutoff) ++rank;
    const Matrix basis = eig.eigenvectors.leftCols(rank);
    const Matrix coords = basis.transpose() * vectors;  // rank x n
    const double dim = static_cast<double>(rank);

    DesignResult out;
    out.span_dim = static_cast<int>(rank);
    Vector w = Vector::Zero(n);
    int nonzero = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (coords.col(i).squaredNorm() > 0.0) ++nonzero;
    for (Eigen::Index i = 0; i < n; ++i)
        if (coords.col(i).squaredNorm() > 0.0) w(i) = 1.0 / nonzero;

    Vector lev(n);
    for (int it = 0; it <= max_iter; ++it) {
        const Matrix a = coords * w.asDiagonal() * coords.transpose();
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() != Eigen::Success)
            throw ConvergenceError("g_optimal_design: design matrix lost rank", 0.0);
        out.logdet_history.push_back(2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum());
        const Matrix solved = llt.matrixL().solve(coords);
        lev = solved.colwise().squaredNorm().transpose();
        Eigen::Index j = 0;
        const double max_lev = lev.maxCoeff(&j);
        out.iterations = it;
        if (max_lev <= dim * (1.0 + eps)) {
            out.weights = w;
            break;
        }
        if (it == max_iter) {
            std::ostringstream msg;
            msg << "g_optimal_design: no convergence after " << max_iter
                << " iterations, max leverage " << max_lev << " vs span dimension " << rank;
            throw ConvergenceError(msg.str(), max_lev);
        }
        // Exact line search on log det((1-s) A + s y y^T).
        const double step = (max_lev / dim - 1.0) / (max_lev - 1.0);
        w *= (1.0 - step);
        w(j) += step;
    }

    // Report the leverage in the original coordinates through a pseudo-inverse.
    const Matrix design = vectors * out.weights.asDiagonal() * vectors.transpose();
    const Matrix pinv = pinv_psd(0.5 * (design + design.transpose()));
    out.max_leverage = (vectors.transpose() * pinv * vectors).diagonal().maxCoeff();
    return out;
}

struct ExplorationPolicy {
    PolicyTable table;
    double lambda = 0.0;
    double max_leverage = 0.0;
    int span_dim = 0;
};

/// Largest phi(a,x)^T sigma_inv phi(a,x) over the whole feature table.
inline double max_leverage(const FiniteContextModel& m, const Matrix& sigma_inv) {
    const Matrix& f = m.features();
    return (f.transpose() * sigma_inv * f).diagonal().maxCoeff();
}

inline ExplorationPolicy build_exploration_policy(const FiniteContextModel& m,
                                                  double eps = kDefaultDesignEps,
                                                  int max_iter = kDefaultDesignMaxIter) {
    RowMatrix table(m.S(), m.K());
    for (int x = 0; x < m.S(); ++x) {
        try {
            const DesignResult r = g_optimal_design(m.context_features(x), eps, max_iter);
            // Normalise away accumulated rounding in the weights.
            table.row(x) = r.weights.transpose() / r.weights.sum();
        } catch (const DegenerateDesign& e) {
            std::ostringstream msg;
            msg << "context " << x << ": " << e.what();
            throw DegenerateDesign(msg.str());
        } catch (const ConvergenceError& e) {
            std::ostringstream msg;
            msg << "context " << x << ": " << e.what();
            throw ConvergenceError(msg.str(), e.residual());
        }
    }
    ExplorationPolicy out;
    out.table = PolicyTable(std::move(table));
    const CovarianceOperator cov = sigma_of_policy(m, out.table);
    out.max_leverage = max_leverage(m, cov.sigma_inv);
    out.span_dim = static_cast<int>(cov.rank);
    out.lambda = 1.0 / out.max_leverage;
    return out;
}

}  // namespace lcb
