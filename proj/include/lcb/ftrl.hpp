#pragma once

// Per-context FTRL subproblems over the simplex and the learning-rate /
// exploration-rate schedules that drive them.

#include "lcb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lcb {

struct TsallisConfig {
    double alpha = 0.5;

    TsallisConfig() = default;
    explicit TsallisConfig(double a) : alpha(a) {
        if (!(a > 0.0 && a < 1.0))
            throw ContractViolation("TsallisConfig: alpha must lie strictly inside (0, 1)");
    }
};

/// psi(q) = (1 - sum_a q_a^alpha) / alpha.
inline double tsallis_entropy(const Vector& q, double alpha) {
    return (1.0 - q.array().pow(alpha).sum()) / alpha;
}

inline double shannon_entropy(const Vector& q) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i)
        if (q(i) > 0.0) h -= q(i) * std::log(q(i));
    return h;
}

struct TsallisSolution {
    Vector q;
    double mu = 0.0;  // normaliser in the caller's (unshifted) loss units
    int iterations = 0;
    double residual = 0.0;
};

inline constexpr double kDefaultSolverTol = 1e-10;
inline constexpr int kDefaultSolverMaxIter = 100;

/// argmin_q <cum_loss, q> + psi(q) / eta over the simplex.
///
/// Stationarity gives q_a = (eta * (cum_loss_a + mu))^(1/(alpha-1)); the
/// normaliser mu is the root of sum_a q_a(mu) = 1, found with safeguarded
/// Newton. Losses are shifted by their minimum so the pole sits at zero.
/// warm_mu, when finite, seeds the iteration.
inline TsallisSolution solve_tsallis(const Eigen::Ref<const Vector>& cum_loss, double eta,
                                     const TsallisConfig& cfg = {}, double tol = kDefaultSolverTol,
                                     double warm_mu = std::numeric_limits<double>::quiet_NaN()) {
    const Eigen::Index k = cum_loss.size();
    if (k < 1) throw ContractViolation("solve_tsallis: empty loss vector");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ContractViolation("solve_tsallis: eta must be positive");
    if (!cum_loss.allFinite()) throw ContractViolation("solve_tsallis: non-finite cumulative loss");

    TsallisSolution out;
    const double lmin = cum_loss.minCoeff();
    if (k == 1) {
        out.q = Vector::Ones(1);
        out.mu = 1.0 / eta - lmin;
        return out;
    }
    const Vector shifted = cum_loss.array() - lmin;
    const double alpha = cfg.alpha;
    const double power = 1.0 / (alpha - 1.0);
    const bool half = alpha == 0.5;

    auto f = [&](double nu) {
        double s = 0.0;
        if (half) {
            for (Eigen::Index a = 0; a < k; ++a) {
                const double z = eta * (shifted(a) + nu);
                s += 1.0 / (z * z);
            }
        } else {
            for (Eigen::Index a = 0; a < k; ++a) s += std::pow(eta * (shifted(a) + nu), power);
        }
        return s - 1.0;
    };
    auto fprime = [&](double nu) {
        double s = 0.0;
        if (half) {
            for (Eigen::Index a = 0; a < k; ++a) {
                const double v = shifted(a) + nu;
                const double z = eta * v;
                s -= 2.0 / (z * z * v);
            }
        } else {
            for (Eigen::Index a = 0; a < k; ++a) {
                const double v = shifted(a) + nu;
                s += power * std::pow(eta * v, power) / v;
            }
        }
        return s;
    };

    // At nu = K^(1-alpha)/eta every q_a <= 1/K, with equality for tied losses,
    // so twice that value gives a strict sign change; at nu = 1/eta
    // the leader alone has q = 1, so f >= 0 and Newton from there approaches
    // the root monotonically (f is convex and decreasing).
    const double scale = 1.0 / eta;
    const double lo = 1e-15 * scale;
    const double hi = 2.0 * std::pow(static_cast<double>(k), 1.0 - alpha) / eta;
    double start = scale;
    if (std::isfinite(warm_mu)) {
        const double warm_nu = warm_mu + lmin;
        if (warm_nu > lo && warm_nu < hi && f(warm_nu) >= 0.0) start = warm_nu;
    }

    RootResult root;
    try {
        root = newton_root(f, fprime, lo, hi, tol, kDefaultSolverMaxIter, start);
    } catch (const ConvergenceError& e) {
        std::ostringstream msg;
        msg << "solve_tsallis (eta=" << eta << ", alpha=" << alpha << "): " << e.what();
        throw ConvergenceError(msg.str(), e.residual());
    }
    const double nu = root.root;
    out.q.resize(k);
    for (Eigen::Index a = 0; a < k; ++a) out.q(a) = std::pow(eta * (shifted(a) + nu), power);
    out.q /= out.q.sum();
    out.mu = nu - lmin;
    out.iterations = root.iterations;
    out.residual = root.residual;
    return out;
}

/// softmax(-eta * cum_loss), the closed-form minimiser under negative entropy.
inline Vector solve_shannon(const Eigen::Ref<const Vector>& cum_loss, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ContractViolation("solve_shannon: eta must be positive");
    if (!cum_loss.allFinite()) throw ContractViolation("solve_shannon: non-finite cumulative loss");
    const double lmin = cum_loss.minCoeff();
    Vector q = (-eta * (cum_loss.array() - lmin)).exp();
    return q / q.sum();
}

// ---------------------------------------------------------------------------
// Schedules

/// Constants behind the LC-Tsallis-INF learning-rate and exploration schedule.
struct Schedule {
    int K = 1;
    int d = 1;
    double L = 1.0;
    double lambda = 1.0;
    bool finite_support = true;

    Schedule() = default;
    Schedule(int arms, int dim, double l_bound, double lam, bool finite)
        : K(arms), d(dim), L(l_bound), lambda(lam), finite_support(finite) {
        if (K < 1 || d < 1) throw ContractViolation("Schedule: K and d must be positive");
        if (!(L > 0.0) || !(lambda > 0.0)) throw ContractViolation("Schedule: L and lambda must be positive");
        // The lambda/16 cap only keeps gamma <= 1/2 when lambda * L <= 1.
        if (!finite_support && lambda * L > 1.0 + 1e-12)
            throw ContractViolation("Schedule: the general-support cap requires lambda * L <= 1");
    }

    double eta_cap() const {
        return finite_support ? std::sqrt(lambda / L) / 16.0 : lambda / 16.0;
    }
};

inline double eta_tilde(const Schedule& s, long t) {
    return std::pow(static_cast<double>(s.K), 0.25) / std::sqrt(static_cast<double>(s.d) * static_cast<double>(t));
}

inline double eta_t(const Schedule& s, long t) {
    if (t < 1) throw ContractViolation("eta_t: rounds start at t = 1");
    return std::min(eta_tilde(s, t), s.eta_cap());
}

inline double gamma_t(const Schedule& s, double eta) {
    if (!(eta >= 0.0)) throw ContractViolation("gamma_t: eta must be non-negative");
    const double gamma = 128.0 * s.L * eta * eta / s.lambda;
    if (gamma > 0.5 * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "gamma_t: schedule contract violated, gamma = " << gamma << " > 1/2 (eta = " << eta << ")";
        throw ContractViolation(msg.str());
    }
    return std::min(gamma, 0.5);
}

/// Entropy-adaptive learning rate of the Shannon-regularised sibling.
class RealFtrlSchedule {
public:
    RealFtrlSchedule(int arms, int dim, double lam, double horizon)
        : K_(arms), lambda_(lam), log_k_(std::log(static_cast<double>(arms))) {
        if (arms < 2) throw ContractViolation("RealFtrlSchedule: needs K >= 2");
        if (!(lam > 0.0)) throw ContractViolation("RealFtrlSchedule: lambda must be positive");
        if (!(horizon > 1.0)) throw ContractViolation("RealFtrlSchedule: horizon must exceed 1");
        inv_eta1_ = std::sqrt(((1.0 / lam + dim) * std::log(horizon)) / log_k_);
        inv_eta_ = inv_eta1_;
    }

    double inv_eta1() const noexcept { return inv_eta1_; }
    double inv_eta() const noexcept { return inv_eta_; }
    double eta() const noexcept { return 1.0 / inv_eta_; }
    double entropy_sum() const noexcept { return entropy_sum_; }
    long t() const noexcept { return t_; }

    /// eta_t / lambda, clipped to 1 so the mixture stays a distribution.
    double gamma() const noexcept { return std::min(1.0, eta() / lambda_); }

    /// Folds in H(q_t(X_t)) and advances to round t + 1.
    void update(double entropy) {
        if (!(entropy >= -1e-12 && entropy <= log_k_ + 1e-12)) {
            std::ostringstream msg;
            msg << "RealFtrlSchedule: entropy " << entropy << " outside [0, log K]";
            throw ContractViolation(msg.str());
        }
        entropy_sum_ += std::clamp(entropy, 0.0, log_k_);
        inv_eta_ += inv_eta1_ / std::sqrt(1.0 + entropy_sum_ / log_k_);
        ++t_;
    }

private:
    int K_;
    double lambda_;
    double log_k_;
    double inv_eta1_ = 0.0;
    double inv_eta_ = 0.0;
    double entropy_sum_ = 0.0;
    long t_ = 1;
};

inline RealFtrlSchedule realftrl_schedule_update(RealFtrlSchedule state, double entropy_of_played_q) {
    state.update(entropy_of_played_q);
    return state;
}

}  // namespace lcb
