#include "lcb/ftrl.hpp"
#include "lcb/rng.hpp"
#include "lcb/testing/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace lcb;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

/// Fixed-step projected gradient descent on the Tsallis objective.
Vector fixed_step_pgd(const Vector& cum_loss, double eta, double alpha, int iters, double step) {
    const Eigen::Index k = cum_loss.size();
    Vector q = Vector::Constant(k, 1.0 / static_cast<double>(k));
    for (int it = 0; it < iters; ++it) {
        Vector g(k);
        for (Eigen::Index a = 0; a < k; ++a) g(a) = cum_loss(a) - std::pow(q(a), alpha - 1.0) / eta;
        q = lcb::testing::project_simplex(q - step * g, 1e-12);
    }
    return q;
}

/// Max relative deviation from q_a^(alpha-1) / eta = cum_loss_a + mu.
double kkt_residual(const Vector& cum_loss, const TsallisSolution& s, double eta, double alpha) {
    double worst = 0.0;
    for (Eigen::Index a = 0; a < cum_loss.size(); ++a) {
        const double lhs = std::pow(s.q(a), alpha - 1.0) / eta;
        const double rhs = cum_loss(a) + s.mu;
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
    return worst;
}

}  // namespace

TEST(SolveTsallis, ZeroLossIsUniform) {
    for (int k : {1, 2, 5, 64})
        for (double eta : {1e-3, 0.7, 10.0}) {
            const auto s = solve_tsallis(Vector::Zero(k), eta);
            for (int a = 0; a < k; ++a) EXPECT_NEAR(s.q(a), 1.0 / k, 1e-12);
        }
}

TEST(SolveTsallis, TwoArmLimitIsMonotone) {
    double prev = 0.5;
    for (double c : {0.1, 1.0, 10.0, 100.0, 1e4, 1e6}) {
        const double q0 = solve_tsallis(vec({0.0, c}), 1.0).q(0);
        EXPECT_GT(q0, prev);
        prev = q0;
    }
    EXPECT_GT(prev, 1.0 - 1e-10);
}

TEST(SolveTsallis, ThreeArmExampleMatchesGradientOracles) {
    const Vector loss = vec({0.0, 0.3, 1.0});
    const auto s = solve_tsallis(loss, 0.5);
    const Vector pgd = fixed_step_pgd(loss, 0.5, 0.5, 100000, 1e-3);
    const Vector ref = lcb::testing::tsallis_primal_oracle(loss, 0.5).q;
    for (int a = 0; a < 3; ++a) {
        EXPECT_NEAR(s.q(a), pgd(a), 1e-6);
        EXPECT_NEAR(s.q(a), ref(a), 1e-6);
    }
    // Frozen reference values.
    EXPECT_NEAR(s.q(0), 0.41613837457195035, 1e-12);
    EXPECT_NEAR(s.q(1), 0.34594896891804378, 1e-12);
    EXPECT_NEAR(s.q(2), 0.2379126565100059, 1e-12);
}

TEST(SolveTsallis, RandomPropertySweep) {
    Rng rng(99);
    for (double alpha : {0.3, 0.5, 0.7}) {
        const TsallisConfig cfg(alpha);
        for (int rep = 0; rep < 300; ++rep) {
            const int k = 2 + static_cast<int>(uniform01(rng) * 63.0);
            const double eta = std::pow(10.0, -3.0 + 4.0 * uniform01(rng));
            const double scale = std::pow(10.0, -1.0 + 3.0 * uniform01(rng));
            Vector loss(k);
            for (int a = 0; a < k; ++a) loss(a) = scale * uniform01(rng);
            const auto s = solve_tsallis(loss, eta, cfg);
            EXPECT_NEAR(s.q.sum(), 1.0, 1e-9);
            EXPECT_GT(s.q.minCoeff(), 0.0);
            EXPECT_LT(s.q.maxCoeff(), 1.0);
            EXPECT_LE(s.residual, kDefaultSolverTol);
            EXPECT_LE(kkt_residual(loss, s, eta, alpha), 1e-8) << "K=" << k << " eta=" << eta;
        }
    }
}

TEST(SolveTsallis, PermutationEquivariant) {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const int k = 2 + rep % 20;
        Vector loss(k);
        for (int a = 0; a < k; ++a) loss(a) = 5.0 * uniform01(rng);
        std::vector<int> perm(static_cast<std::size_t>(k));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Vector permuted(k);
        for (int a = 0; a < k; ++a) permuted(a) = loss(perm[static_cast<std::size_t>(a)]);
        const auto s = solve_tsallis(loss, 0.8);
        const auto sp = solve_tsallis(permuted, 0.8);
        for (int a = 0; a < k; ++a) EXPECT_NEAR(sp.q(a), s.q(perm[static_cast<std::size_t>(a)]), 1e-14);
    }
}

TEST(SolveTsallis, LocallyOptimalAndNoWorseThanOracle) {
    Rng rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        const int k = 2 + rep % 10;
        const double eta = std::pow(10.0, -2.0 + 2.0 * uniform01(rng));
        Vector loss(k);
        for (int a = 0; a < k; ++a) loss(a) = 3.0 * uniform01(rng);
        const Vector q = solve_tsallis(loss, eta).q;
        const double f = lcb::testing::tsallis_objective(q, loss, eta, 0.5);
        const double f_oracle =
            lcb::testing::tsallis_objective(lcb::testing::tsallis_primal_oracle(loss, eta).q, loss, eta, 0.5);
        EXPECT_LE(f, f_oracle + 1e-8);
        // Shift a little mass between every ordered pair of arms.
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                if (i == j) continue;
                Vector p = q;
                const double h = 1e-3 * q(i);
                p(i) -= h;
                p(j) += h;
                EXPECT_LE(f, lcb::testing::tsallis_objective(p, loss, eta, 0.5) + 1e-14 * std::abs(f));
            }
    }
}

TEST(SolveTsallis, WarmStartGivesSameAnswer) {
    Rng rng(3);
    Vector loss(6);
    for (int a = 0; a < 6; ++a) loss(a) = uniform01(rng);
    const auto cold = solve_tsallis(loss, 0.3);
    Vector next = loss;
    next(2) += 0.05;
    const auto warm = solve_tsallis(next, 0.29, {}, kDefaultSolverTol, cold.mu);
    const auto fresh = solve_tsallis(next, 0.29);
    EXPECT_LE((warm.q - fresh.q).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(SolveTsallis, ApproachesShannonAsAlphaTendsToOne) {
    // Near alpha = 1 the Tsallis term is (1 - alpha)/alpha times the Shannon
    // entropy, so eta rescales by alpha / (1 - alpha).
    Rng rng(7);
    const double alpha = 0.999;
    for (int rep = 0; rep < 50; ++rep) {
        const int k = 2 + rep % 8;
        Vector loss(k);
        for (int a = 0; a < k; ++a) loss(a) = 2.0 * uniform01(rng);
        const double eta_s = 0.2 + 2.0 * uniform01(rng);
        const Vector qt = solve_tsallis(loss, eta_s * (1.0 - alpha) / alpha, TsallisConfig(alpha)).q;
        const Vector qs = solve_shannon(loss, eta_s);
        EXPECT_LE((qt - qs).lpNorm<Eigen::Infinity>(), 1e-2);
    }
}

TEST(SolveTsallis, RejectsBadInput) {
    EXPECT_THROW(solve_tsallis(Vector::Zero(3), 0.0), ContractViolation);
    EXPECT_THROW(solve_tsallis(vec({0.0, std::nan("")}), 1.0), ContractViolation);
    EXPECT_THROW(TsallisConfig(1.0), ContractViolation);
    EXPECT_THROW(TsallisConfig(0.0), ContractViolation);
}

TEST(SolveShannon, Examples) {
    const Vector u = solve_shannon(Vector::Zero(4), 3.0);
    for (int a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(u(a), 0.25);
    const Vector q = solve_shannon(vec({0.0, std::log(3.0)}), 1.0);
    EXPECT_NEAR(q(0), 0.75, 1e-15);
    EXPECT_NEAR(q(1), 0.25, 1e-15);
    // Large losses do not overflow and shifting changes nothing.
    const Vector big = vec({1e6, 1e6 + 1.0, 1e6 + 2.0});
    const Vector a = solve_shannon(big, 1.0);
    const Vector b = solve_shannon((big.array() - 1e6).matrix(), 1.0);
    EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-15);
    EXPECT_NEAR(a.sum(), 1.0, 1e-15);
}

TEST(Schedule, EtaTildeExample) {
    const Schedule s(16, 4, 4.0, 1.0, true);
    EXPECT_DOUBLE_EQ(eta_tilde(s, 1), 1.0);
    EXPECT_DOUBLE_EQ(eta_tilde(s, 4), 0.5);
    EXPECT_DOUBLE_EQ(eta_tilde(s, 400), 0.05);
}

TEST(Schedule, CapBindsOnlyBeforeCrossover) {
    // lambda = 1, L = 4: cap 1/32; eta_tilde = 1/sqrt(t) crosses it at t = 1024.
    const Schedule s(16, 4, 4.0, 1.0, true);
    EXPECT_DOUBLE_EQ(s.eta_cap(), 1.0 / 32.0);
    EXPECT_DOUBLE_EQ(eta_t(s, 1), 1.0 / 32.0);
    EXPECT_DOUBLE_EQ(eta_t(s, 1024), 1.0 / 32.0);
    EXPECT_DOUBLE_EQ(eta_t(s, 1025), eta_tilde(s, 1025));
    EXPECT_LT(eta_t(s, 1025), 1.0 / 32.0);
    EXPECT_THROW(eta_t(s, 0), ContractViolation);
}

TEST(Schedule, GammaExamples) {
    const Schedule s(4, 2, 4.0, 0.25, true);
    EXPECT_NEAR(gamma_t(s, 0.01), 0.2048, 1e-15);
    EXPECT_DOUBLE_EQ(gamma_t(s, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(gamma_t(s, s.eta_cap()), 0.5);
    EXPECT_THROW(gamma_t(s, 2.0 * s.eta_cap()), ContractViolation);
}

TEST(Schedule, GammaAtMostHalfAndEtaNonIncreasing) {
    const Schedule schedules[] = {
        Schedule(4, 3, 4.0, 1.0 / 12.0, true),  Schedule(16, 4, 4.0, 1.0, true),
        Schedule(2, 1, 1.0, 1.0, true),         Schedule(64, 2, 32.0, 0.01, true),
        Schedule(4, 3, 4.0, 0.25, false),       Schedule(2, 2, 1.0, 1.0, false),
        Schedule(8, 8, 10.0, 0.001, false),
    };
    for (const auto& s : schedules) {
        double prev = std::numeric_limits<double>::infinity();
        for (long t = 1; t <= 1000000; ++t) {
            const double eta = eta_t(s, t);
            ASSERT_LE(eta, prev);
            ASSERT_LE(gamma_t(s, eta), 0.5);
            prev = eta;
        }
    }
}

TEST(Schedule, GeneralSupportRequiresSmallLambdaL) {
    EXPECT_THROW(Schedule(4, 2, 4.0, 0.5, false), ContractViolation);
    EXPECT_NO_THROW(Schedule(4, 2, 4.0, 0.5, true));
    EXPECT_DOUBLE_EQ(Schedule(4, 2, 4.0, 0.25, false).eta_cap(), 0.25 / 16.0);
}

TEST(RealFtrlSchedule, InitialRateExample) {
    const RealFtrlSchedule s(2, 1, 1.0, std::exp(1.0));
    EXPECT_NEAR(s.inv_eta1(), std::sqrt(2.0 / std::log(2.0)), 1e-14);
    EXPECT_DOUBLE_EQ(s.eta(), 1.0 / s.inv_eta1());
}

TEST(RealFtrlSchedule, ZeroEntropyGrowsLinearly) {
    RealFtrlSchedule s(4, 3, 0.5, 1000.0);
    const double base = s.inv_eta1();
    for (int t = 1; t <= 50; ++t) {
        s = realftrl_schedule_update(s, 0.0);
        EXPECT_NEAR(s.inv_eta(), base * (t + 1), 1e-12 * base * (t + 1));
    }
}

TEST(RealFtrlSchedule, MaximalEntropyIncrements) {
    RealFtrlSchedule s(4, 3, 0.5, 1000.0);
    for (int t = 1; t <= 50; ++t) {
        const double before = s.inv_eta();
        s.update(std::log(4.0));
        EXPECT_NEAR(s.inv_eta() - before, s.inv_eta1() / std::sqrt(1.0 + t), 1e-12);
    }
    EXPECT_EQ(s.t(), 51);
}

TEST(RealFtrlSchedule, GammaAndErrors) {
    RealFtrlSchedule s(3, 2, 0.1, 100.0);
    EXPECT_DOUBLE_EQ(s.gamma(), std::min(1.0, s.eta() / 0.1));
    EXPECT_THROW(s.update(-0.1), ContractViolation);
    EXPECT_THROW(s.update(std::log(3.0) + 0.1), ContractViolation);
    EXPECT_THROW(RealFtrlSchedule(1, 2, 0.1, 100.0), ContractViolation);
}

TEST(Entropies, KnownValues) {
    EXPECT_NEAR(shannon_entropy(Vector::Constant(4, 0.25)), std::log(4.0), 1e-15);
    EXPECT_DOUBLE_EQ(shannon_entropy(vec({1.0, 0.0})), 0.0);
    EXPECT_NEAR(tsallis_entropy(Vector::Constant(4, 0.25), 0.5), (1.0 - 2.0) / 0.5, 1e-15);
}
