#pragma once

#include "lcb/covariance.hpp"
#include "lcb/model.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace lcb {

struct LossEstimate {
    Vector theta_hat;
    RowMatrix per_context;  // S x K, entry (x, a) = <theta_hat, phi(a, x)>
};

/// Sigma^+ phi(A_t, X_t) loss.
inline Vector theta_hat(const CovarianceOperator& cov, const Eigen::Ref<const Vector>& feature, double loss) {
    if (feature.size() != cov.sigma_inv.cols())
        throw ContractViolation("theta_hat: feature dimension does not match the covariance");
    return cov.sigma_inv * feature * loss;
}

inline RowMatrix loss_estimates(const FiniteContextModel& m, const Vector& theta) {
    if (theta.size() != m.d()) throw ContractViolation("loss_estimates: dimension mismatch");
    RowMatrix out(m.S(), m.K());
    for (int x = 0; x < m.S(); ++x) out.row(x) = (m.context_features(x).transpose() * theta).transpose();
    return out;
}

inline LossEstimate make_loss_estimate(const FiniteContextModel& m, Vector theta) {
    LossEstimate e;
    e.per_context = loss_estimates(m, theta);
    e.theta_hat = std::move(theta);
    return e;
}

struct BoundViolation {
    int x = 0;
    int arm = 0;
    double value = 0.0;
    double bound = 0.0;
};

/// min{ 1/(lambda gamma), sqrt(1/(lambda gamma (1-gamma) q g)) }; infinite
/// when gamma = 0.
inline double loss_estimate_bound(double lambda, double gamma, double q, double g) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (!(gamma > 0.0)) return inf;
    const double first = 1.0 / (lambda * gamma);
    const double denom = lambda * gamma * (1.0 - gamma) * q * g;
    const double second = denom > 0.0 ? std::sqrt(1.0 / denom) : inf;
    return std::min(first, second);
}

/// Every (x, a) where |estimate| exceeds the magnitude bound by more than
/// rel_slack; empty for any round of a correctly built mixture policy.
inline std::vector<BoundViolation> check_loss_estimate_bound(const FiniteContextModel& m, double lambda,
                                                             double gamma, const PolicyTable& q_table,
                                                             const LossEstimate& estimate,
                                                             double rel_slack = 1e-8) {
    std::vector<BoundViolation> out;
    for (int x = 0; x < m.S(); ++x) {
        for (int a = 0; a < m.K(); ++a) {
            const double bound = loss_estimate_bound(lambda, gamma, q_table(x, a), m.g(x));
            const double value = std::abs(estimate.per_context(x, a));
            if (value > bound * (1.0 + rel_slack)) out.push_back({x, a, value, bound});
        }
    }
    return out;
}

}  // namespace lcb
