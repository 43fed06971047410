#pragma once

#include "lcb/model.hpp"
#include "lcb/numerics.hpp"

#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

namespace lcb {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kRowSumTol = 1e-10;

/// Row-stochastic S x K table; entry (x, a) is p(a | x).
class PolicyTable {
public:
    PolicyTable() = default;

    explicit PolicyTable(RowMatrix probs) : probs_(std::move(probs)) {
        for (Eigen::Index x = 0; x < probs_.rows(); ++x) {
            double sum = 0.0;
            for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
                const double p = probs_(x, a);
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    std::ostringstream msg;
                    msg << "PolicyTable: entry (" << x << ", " << a << ") = " << p << " is not a probability";
                    throw ContractViolation(msg.str());
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTol) {
                std::ostringstream msg;
                msg << "PolicyTable: row " << x << " sums to " << sum;
                throw ContractViolation(msg.str());
            }
        }
    }

    static PolicyTable uniform(int S, int K) {
        return PolicyTable(RowMatrix::Constant(S, K, 1.0 / K));
    }

    /// Row-wise (1 - gamma) * q + gamma * e.
    static PolicyTable mixture(const PolicyTable& q, const PolicyTable& e, double gamma) {
        if (q.rows() != e.rows() || q.cols() != e.cols())
            throw ContractViolation("PolicyTable::mixture: shape mismatch");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw ContractViolation("PolicyTable::mixture: gamma outside [0, 1]");
        return PolicyTable((1.0 - gamma) * q.probs_ + gamma * e.probs_);
    }

    int rows() const noexcept { return static_cast<int>(probs_.rows()); }
    int cols() const noexcept { return static_cast<int>(probs_.cols()); }
    double operator()(int x, int a) const { return probs_(x, a); }
    const RowMatrix& probs() const noexcept { return probs_; }
    auto row(int x) const { return probs_.row(x); }

private:
    RowMatrix probs_;
};

/// Sigma(p) together with its pseudo-inverse.
struct CovarianceOperator {
    Matrix sigma;
    Matrix sigma_inv;
    Eigen::Index rank = 0;
};

/// Sigma(p) = sum_x g(x) sum_a p(a|x) phi(a,x) phi(a,x)^T, accumulated with
/// compensated summation (contexts outer, arms inner).
inline Matrix sigma_matrix(const FiniteContextModel& m, const PolicyTable& p) {
    if (p.rows() != m.S() || p.cols() != m.K())
        throw ContractViolation("sigma_of_policy: policy shape does not match the model");
    const int d = m.d();
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(d) * (d + 1) / 2);
    for (int x = 0; x < m.S(); ++x) {
        const double gx = m.g(x);
        if (gx == 0.0) continue;
        for (int a = 0; a < m.K(); ++a) {
            const double w = gx * p(x, a);
            if (w == 0.0) continue;
            const auto phi = m.feature(a, x);
            std::size_t k = 0;
            for (int i = 0; i < d; ++i) {
                const double wi = w * phi(i);
                for (int j = i; j < d; ++j) acc[k++].add(wi * phi(j));
            }
        }
    }
    Matrix sigma(d, d);
    std::size_t k = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            sigma(i, j) = acc[k].value();
            sigma(j, i) = sigma(i, j);
            ++k;
        }
    return sigma;
}

inline CovarianceOperator sigma_of_policy(const FiniteContextModel& m, const PolicyTable& p,
                                          double rel_tol = kDefaultPinvTol) {
    CovarianceOperator out;
    out.sigma = sigma_matrix(m, p);
    out.sigma_inv = pinv_psd(out.sigma, rel_tol, &out.rank);
    return out;
}

}  // namespace lcb
