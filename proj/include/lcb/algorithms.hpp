#pragma once

// Bandit policies driven through a common round()/update() protocol:
//   LcTsallisInf   - Tsallis-regularised FTRL over all contexts mixed with the
//                    G-optimal exploration policy, importance-weighted linear
//                    loss estimates through the exact Sigma(pi_t)^+.
//   RealFtrl       - the Shannon-entropy sibling with an entropy-adaptive rate.
//   PerContextTsallisInf - one independent K-armed Tsallis-INF per context.
//   UniformPolicy  - control.

#include "lcb/covariance.hpp"
#include "lcb/design.hpp"
#include "lcb/estimator.hpp"
#include "lcb/ftrl.hpp"
#include "lcb/model.hpp"
#include "lcb/rng.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace lcb {

struct RoundOutput {
    PolicyTable q_table;
    PolicyTable pi_table;
    int x = 0;
    int chosen_arm = 0;
    double omega = 0.0;
    double gamma = 0.0;
    double eta = 0.0;
};

/// max_x (1 - max_a q(a|x)).
inline double omega_of(const PolicyTable& q) {
    double omega = 0.0;
    for (int x = 0; x < q.rows(); ++x) omega = std::max(omega, 1.0 - q.row(x).maxCoeff());
    return std::clamp(omega, 0.0, 1.0);
}

namespace detail {
inline void check_context(const FiniteContextModel& m, int x) {
    if (x < 0 || x >= m.S()) throw std::out_of_range("observed context index out of range");
}

inline void check_loss(double loss) {
    if (!(loss >= -1.0 && loss <= 1.0)) throw ContractViolation("realized loss outside [-1, 1]");
}
}  // namespace detail

// ---------------------------------------------------------------------------

class LcTsallisInf {
public:
    LcTsallisInf(const FiniteContextModel& m, ExplorationPolicy exploration, TsallisConfig cfg = {},
                 bool finite_support = true, double solver_tol = kDefaultSolverTol)
        : cum_loss_(RowMatrix::Zero(m.S(), m.K())),
          schedule_(m.K(), m.d(), m.L(), exploration.lambda, finite_support),
          cfg_(cfg),
          exploration_(std::move(exploration)),
          warm_mu_(static_cast<std::size_t>(m.S()), std::numeric_limits<double>::quiet_NaN()),
          tol_(solver_tol) {
        if (exploration_.table.rows() != m.S() || exploration_.table.cols() != m.K())
            throw ContractViolation("LcTsallisInf: exploration policy shape does not match the model");
    }

    long t() const noexcept { return t_; }
    const RowMatrix& cum_loss() const noexcept { return cum_loss_; }
    const Schedule& schedule() const noexcept { return schedule_; }
    const ExplorationPolicy& exploration() const noexcept { return exploration_; }
    const TsallisConfig& config() const noexcept { return cfg_; }
    const std::optional<LossEstimate>& last_estimate() const noexcept { return last_estimate_; }
    int max_solver_iterations() const noexcept { return max_iters_; }

    /// Disables the warm start of the normaliser (used to check invariance).
    void set_warm_start(bool on) noexcept { warm_start_ = on; }

    /// FTRL solution for every context under the round-t regulariser weight.
    /// Round 1 has no loss history and is uniform; later rounds use eta_{t-1}.
    PolicyTable q_table() {
        const int S = static_cast<int>(cum_loss_.rows());
        const int K = static_cast<int>(cum_loss_.cols());
        if (t_ == 1) return PolicyTable::uniform(S, K);
        const double eta = eta_t(schedule_, t_ - 1);
        RowMatrix q(S, K);
        for (int x = 0; x < S; ++x) {
            const double warm = warm_start_ ? warm_mu_[static_cast<std::size_t>(x)]
                                            : std::numeric_limits<double>::quiet_NaN();
            TsallisSolution sol;
            try {
                sol = solve_tsallis(cum_loss_.row(x).transpose(), eta, cfg_, tol_, warm);
            } catch (const ConvergenceError& e) {
                std::ostringstream msg;
                msg << "context " << x << ": " << e.what();
                throw ConvergenceError(msg.str(), e.residual());
            }
            warm_mu_[static_cast<std::size_t>(x)] = sol.mu;
            max_iters_ = std::max(max_iters_, sol.iterations);
            q.row(x) = sol.q.transpose();
        }
        return PolicyTable(std::move(q));
    }

    RoundOutput round(const FiniteContextModel& m, int x, Rng& rng) {
        detail::check_context(m, x);
        RoundOutput out;
        out.x = x;
        out.q_table = q_table();
        out.eta = eta_t(schedule_, t_);
        out.gamma = gamma_t(schedule_, out.eta);
        out.pi_table = PolicyTable::mixture(out.q_table, exploration_.table, out.gamma);
        out.omega = omega_of(out.q_table);
        out.chosen_arm = sample_index(out.pi_table.row(x), uniform01(rng));
        return out;
    }

    void update(const FiniteContextModel& m, const RoundOutput& out, double realized_loss) {
        detail::check_loss(realized_loss);
        const CovarianceOperator cov = sigma_of_policy(m, out.pi_table);
        LossEstimate est = make_loss_estimate(m, theta_hat(cov, m.feature(out.chosen_arm, out.x), realized_loss));
        cum_loss_ += est.per_context;
        last_estimate_ = std::move(est);
        ++t_;
    }

private:
    RowMatrix cum_loss_;
    long t_ = 1;
    Schedule schedule_;
    TsallisConfig cfg_;
    ExplorationPolicy exploration_;
    std::vector<double> warm_mu_;
    double tol_;
    bool warm_start_ = true;
    int max_iters_ = 0;
    std::optional<LossEstimate> last_estimate_;
};

inline RoundOutput lc_tsallis_round(LcTsallisInf& state, const FiniteContextModel& m, int x, Rng& rng) {
    return state.round(m, x, rng);
}

inline void lc_tsallis_update(LcTsallisInf& state, const FiniteContextModel& m, const RoundOutput& out,
                              double realized_loss) {
    state.update(m, out, realized_loss);
}

// ---------------------------------------------------------------------------

class RealFtrl {
public:
    RealFtrl(const FiniteContextModel& m, ExplorationPolicy exploration, double horizon)
        : cum_loss_(RowMatrix::Zero(m.S(), m.K())),
          schedule_(m.K(), m.d(), exploration.lambda, horizon),
          exploration_(std::move(exploration)) {}

    long t() const noexcept { return t_; }
    const RealFtrlSchedule& schedule() const noexcept { return schedule_; }
    const RowMatrix& cum_loss() const noexcept { return cum_loss_; }

    PolicyTable q_table() const {
        const int S = static_cast<int>(cum_loss_.rows());
        const int K = static_cast<int>(cum_loss_.cols());
        if (t_ == 1) return PolicyTable::uniform(S, K);
        RowMatrix q(S, K);
        for (int x = 0; x < S; ++x)
            q.row(x) = solve_shannon(cum_loss_.row(x).transpose(), schedule_.eta()).transpose();
        return PolicyTable(std::move(q));
    }

    RoundOutput round(const FiniteContextModel& m, int x, Rng& rng) {
        detail::check_context(m, x);
        RoundOutput out;
        out.x = x;
        out.q_table = q_table();
        out.eta = schedule_.eta();
        out.gamma = schedule_.gamma();
        out.pi_table = PolicyTable::mixture(out.q_table, exploration_.table, out.gamma);
        out.omega = omega_of(out.q_table);
        out.chosen_arm = sample_index(out.pi_table.row(x), uniform01(rng));
        return out;
    }

    void update(const FiniteContextModel& m, const RoundOutput& out, double realized_loss) {
        detail::check_loss(realized_loss);
        const CovarianceOperator cov = sigma_of_policy(m, out.pi_table);
        const Vector th = theta_hat(cov, m.feature(out.chosen_arm, out.x), realized_loss);
        cum_loss_ += loss_estimates(m, th);
        schedule_.update(shannon_entropy(out.q_table.row(out.x).transpose()));
        ++t_;
    }

private:
    RowMatrix cum_loss_;
    long t_ = 1;
    RealFtrlSchedule schedule_;
    ExplorationPolicy exploration_;
};

inline RoundOutput realftrl_round(RealFtrl& state, const FiniteContextModel& m, int x, Rng& rng) {
    return state.round(m, x, rng);
}

inline void realftrl_update(RealFtrl& state, const FiniteContextModel& m, const RoundOutput& out,
                            double realized_loss) {
    state.update(m, out, realized_loss);
}

// ---------------------------------------------------------------------------

/// Independent 1/2-Tsallis-INF per context with eta = 2/sqrt(visits) and the
/// classic importance-weighted estimate; features are ignored.
class PerContextTsallisInf {
public:
    explicit PerContextTsallisInf(const FiniteContextModel& m)
        : cum_loss_(RowMatrix::Zero(m.S(), m.K())),
          visits_(static_cast<std::size_t>(m.S()), 0),
          warm_mu_(static_cast<std::size_t>(m.S()), std::numeric_limits<double>::quiet_NaN()),
          next_q_(RowMatrix::Constant(m.S(), m.K(), 1.0 / m.K())) {}

    long visits(int x) const { return visits_.at(static_cast<std::size_t>(x)); }
    const RowMatrix& cum_loss() const noexcept { return cum_loss_; }

    /// Learning rate used on the next visit to x.
    double next_eta(int x) const { return 2.0 / std::sqrt(static_cast<double>(visits(x) + 1)); }

    RoundOutput round(const FiniteContextModel& m, int x, Rng& rng) {
        detail::check_context(m, x);
        RoundOutput out;
        out.x = x;
        out.q_table = PolicyTable(next_q_);
        out.pi_table = out.q_table;
        out.eta = next_eta(x);
        out.gamma = 0.0;
        out.omega = omega_of(out.q_table);
        out.chosen_arm = sample_index(out.pi_table.row(x), uniform01(rng));
        return out;
    }

    void update(const FiniteContextModel&, const RoundOutput& out, double realized_loss) {
        detail::check_loss(realized_loss);
        const int x = out.x;
        const int a = out.chosen_arm;
        cum_loss_(x, a) += realized_loss / out.q_table(x, a);
        ++visits_[static_cast<std::size_t>(x)];
        const TsallisSolution sol = solve_tsallis(cum_loss_.row(x).transpose(), next_eta(x), TsallisConfig(0.5),
                                                  kDefaultSolverTol, warm_mu_[static_cast<std::size_t>(x)]);
        warm_mu_[static_cast<std::size_t>(x)] = sol.mu;
        next_q_.row(x) = sol.q.transpose();
    }

private:
    RowMatrix cum_loss_;
    std::vector<long> visits_;
    std::vector<double> warm_mu_;
    RowMatrix next_q_;
};

// ---------------------------------------------------------------------------

class UniformPolicy {
public:
    explicit UniformPolicy(const FiniteContextModel& m) : table_(PolicyTable::uniform(m.S(), m.K())) {}

    RoundOutput round(const FiniteContextModel& m, int x, Rng& rng) {
        detail::check_context(m, x);
        RoundOutput out;
        out.x = x;
        out.q_table = table_;
        out.pi_table = table_;
        out.omega = omega_of(table_);
        out.chosen_arm = sample_index(table_.row(x), uniform01(rng));
        return out;
    }

    void update(const FiniteContextModel&, const RoundOutput&, double realized_loss) {
        detail::check_loss(realized_loss);
    }

private:
    PolicyTable table_;
};

inline int uniform_round(int num_arms, Rng& rng) {
    if (num_arms < 1) throw ContractViolation("uniform_round: needs at least one arm");
    return std::min(num_arms - 1, static_cast<int>(uniform01(rng) * num_arms));
}

// ---------------------------------------------------------------------------

using Algorithm = std::variant<LcTsallisInf, RealFtrl, PerContextTsallisInf, UniformPolicy>;

struct AlgorithmSpec {
    std::string name = "lc-tsallis-inf";
    double alpha = 0.5;
    double design_eps = kDefaultDesignEps;
    bool finite_support = true;
};

inline const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> names{"lc-tsallis-inf", "realftrl", "per-context-tsallis-inf",
                                                "uniform"};
    return names;
}

inline bool needs_exploration(const AlgorithmSpec& spec) {
    return spec.name == "lc-tsallis-inf" || spec.name == "realftrl";
}

inline Algorithm make_algorithm(const AlgorithmSpec& spec, const FiniteContextModel& m,
                                const std::optional<ExplorationPolicy>& exploration, long horizon) {
    if (needs_exploration(spec) && !exploration)
        throw ContractViolation("make_algorithm: '" + spec.name + "' needs an exploration policy");
    if (spec.name == "lc-tsallis-inf")
        return LcTsallisInf(m, *exploration, TsallisConfig(spec.alpha), spec.finite_support);
    if (spec.name == "realftrl") return RealFtrl(m, *exploration, static_cast<double>(std::max(horizon, 2L)));
    if (spec.name == "per-context-tsallis-inf") return PerContextTsallisInf(m);
    if (spec.name == "uniform") return UniformPolicy(m);
    throw std::invalid_argument("unknown algorithm '" + spec.name + "'");
}

}  // namespace lcb
