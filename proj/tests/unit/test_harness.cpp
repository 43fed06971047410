#include "lcb/harness.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace lcb;

namespace {

/// Every suboptimal arm sits exactly `gap` above arm 0 in every context.
nlohmann::json uniform_gap_instance(int S, int K, double gap) {
    Matrix f(2, S * K);
    for (int x = 0; x < S; ++x)
        for (int a = 0; a < K; ++a) {
            f(0, x * K + a) = a == 0 ? 0.0 : gap;
            f(1, x * K + a) = 0.1 * (x + 1) * (a % 2 == 0 ? 1.0 : -1.0);
        }
    const FiniteContextModel m(S, K, 2, std::vector<double>(static_cast<std::size_t>(S), 1.0 / S), S, f);
    nlohmann::json j = instance_to_json(m);
    j["thetas"] = {{1.0, 0.0}};
    return j;
}

RunConfig make_config(nlohmann::json instance, const std::string& alg, long T, int reps) {
    RunConfig cfg;
    cfg.instance = std::move(instance);
    cfg.algorithm.name = alg;
    cfg.T = T;
    cfg.replications = reps;
    cfg.base_seed = 7;
    return cfg;
}

nlohmann::json margin_instance() {
    return {{"generator", "margin"}, {"S", 3}, {"K", 3}, {"d", 2}, {"delta_star", 0.3}, {"beta", "inf"}, {"seed", 2}};
}

}  // namespace

TEST(OptimalPolicy, StochasticAndSingleArm) {
    const Environment env = environment_from_json(margin_instance(), 10);
    const auto rho = optimal_policy(env, 10);
    const auto gaps = compute_gaps(env.model, env.palette[0]);
    EXPECT_EQ(rho, gaps.opt_arm);

    const FiniteContextModel one(2, 1, 1, {0.5, 0.5}, 2.0, Matrix::Constant(1, 2, 0.5));
    nlohmann::json j = instance_to_json(one);
    j["thetas"] = {{1.0}};
    EXPECT_EQ(optimal_policy(environment_from_json(j, 5), 5), std::vector<int>({0, 0}));
}

TEST(OptimalPolicy, TiesGoToLowestIndex) {
    const FiniteContextModel m(1, 3, 1, {1.0}, 1.0, Matrix::Constant(1, 3, 0.5));
    nlohmann::json j = instance_to_json(m);
    j["thetas"] = {{1.0}};
    EXPECT_EQ(optimal_policy(environment_from_json(j, 5), 5), std::vector<int>({0}));
}

TEST(ExpectedRoundRegret, Examples) {
    const Environment env = environment_from_json(uniform_gap_instance(3, 2, 0.4), 1);
    const auto rho = optimal_policy(env, 1);
    RowMatrix point = RowMatrix::Zero(3, 2);
    for (int x = 0; x < 3; ++x) point(x, rho[static_cast<std::size_t>(x)]) = 1.0;
    EXPECT_EQ(expected_round_regret(env.model, PolicyTable(point), env.palette[0], rho), 0.0);
    EXPECT_NEAR(expected_round_regret(env.model, PolicyTable::uniform(3, 2), env.palette[0], rho), 0.2, 1e-15);
}

TEST(ExpectedRoundRegret, MatchesMonteCarlo) {
    Rng rng(3);
    const auto inst = test::random_instance(rng, 4, 3, 3);
    RowMatrix p(4, 3);
    for (int x = 0; x < 4; ++x) {
        for (int a = 0; a < 3; ++a) p(x, a) = 0.1 + uniform01(rng);
        p.row(x) /= p.row(x).sum();
    }
    const PolicyTable pi(p);
    const auto rho = compute_gaps(inst.model, inst.theta).opt_arm;
    const double exact = expected_round_regret(inst.model, pi, inst.theta, rho);
    // Same quantity through the precomputed tables used by the runner.
    Environment env{inst.model, {inst.theta}, {}, {}, {}};
    EXPECT_NEAR(detail::table_regret(detail::weighted_gap_tables(env, rho)[0], pi), exact, 1e-15);

    const long n = 1000000;
    double sum = 0.0, sq = 0.0;
    std::discrete_distribution<int> ctx(inst.model.g().begin(), inst.model.g().end());
    for (long i = 0; i < n; ++i) {
        const int x = ctx(rng);
        const int a = sample_index(pi.row(x), uniform01(rng));
        const double r = expected_loss(inst.model, inst.theta, x, a) -
                         expected_loss(inst.model, inst.theta, x, rho[static_cast<std::size_t>(x)]);
        sum += r;
        sq += r * r;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_NEAR(mean, exact, 3.0 * se);
}

TEST(Run, UniformPolicyClosedForm) {
    const double gap = 0.3;
    const int K = 4;
    const long T = 2000;
    const auto traces = run(make_config(uniform_gap_instance(3, K, gap), "uniform", T, 2));
    for (const auto& tr : traces) {
        EXPECT_EQ(tr.rounds.back(), T);
        EXPECT_NEAR(tr.cum_regret.back(), T * gap * (K - 1) / K, 1e-9);
        for (std::size_t i = 0; i < tr.rounds.size(); ++i)
            EXPECT_NEAR(tr.cum_regret[i], tr.rounds[i] * gap * (K - 1) / K, 1e-9);
    }
}

TEST(Run, ZeroGapInstanceHasZeroRegretForEveryAlgorithm) {
    const FiniteContextModel m(2, 3, 2, {0.5, 0.5}, 2.0,
                               (Matrix(2, 6) << 0.5, 0.5, 0.5, -0.2, -0.2, -0.2, 0.1, 0.1, 0.1, 0.4, 0.4, 0.4).finished());
    nlohmann::json j = instance_to_json(m);
    j["thetas"] = {{1.0, 0.5}};
    for (const auto& name : algorithm_names()) {
        const auto traces = run(make_config(j, name, 500, 2));
        for (const auto& tr : traces)
            for (double r : tr.cum_regret) EXPECT_EQ(r, 0.0) << name;
    }
}

TEST(Run, StochasticTraceIsNonDecreasingAndDeterministic) {
    RunConfig cfg = make_config(margin_instance(), "lc-tsallis-inf", 3000, 3);
    cfg.recording.kind = Recording::Kind::Stride;
    cfg.recording.stride = 100;
    const auto a = run(cfg, 1);
    const auto b = run(cfg, 3);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(a[r].cum_regret, b[r].cum_regret);
        EXPECT_EQ(a[r].eta, b[r].eta);
        for (std::size_t i = 1; i < a[r].cum_regret.size(); ++i)
            EXPECT_GE(a[r].cum_regret[i], a[r].cum_regret[i - 1]);
    }
    // Different replications use different seeds.
    EXPECT_NE(a[0].cum_regret, a[1].cum_regret);
}

TEST(Run, BoundChecksStayClean) {
    RunConfig cfg = make_config(margin_instance(), "lc-tsallis-inf", 1000, 1);
    cfg.diagnostics.bound_checks = true;
    const auto traces = run(cfg);
    EXPECT_EQ(traces[0].bound_checks, 1000);
    EXPECT_EQ(traces[0].bound_violations, 0);
}

TEST(Run, ScheduleShorterThanHorizonIsAConfigError) {
    nlohmann::json j = uniform_gap_instance(2, 2, 0.2);
    j["thetas"] = {{1.0, 0.0}, {-1.0, 0.0}};
    j["schedule"] = {0, 1, 0};
    EXPECT_THROW(prepare_run(make_config(j, "uniform", 5, 1)), std::invalid_argument);
    EXPECT_NO_THROW(prepare_run(make_config(j, "uniform", 3, 1)));
}

TEST(RunErrorMessage, CarriesProvenance) {
    const RunError e(2, 17, 3, "boom");
    EXPECT_STREQ(e.what(), "replication 2, round 17, context 3: boom");
}

TEST(RecordedRounds, Variants) {
    EXPECT_EQ(recorded_rounds({}, 10), std::vector<long>({1, 2, 4, 8, 10}));
    Recording stride{Recording::Kind::Stride, 4, {}};
    EXPECT_EQ(recorded_rounds(stride, 10), std::vector<long>({4, 8, 10}));
    Recording list{Recording::Kind::List, 1, {5, 3, 50, 3}};
    EXPECT_EQ(recorded_rounds(list, 10), std::vector<long>({3, 5, 10}));
}

TEST(Aggregate, StandardErrors) {
    RegretTrace a{{1, 2}, {1.0, 2.0}, {}, {}, {}, 0, 0};
    const Summary one = aggregate({a});
    EXPECT_EQ(one.mean, a.cum_regret);
    EXPECT_EQ(one.stderr_, std::vector<double>({0.0, 0.0}));
    EXPECT_EQ(aggregate({a, a, a}).stderr_, std::vector<double>({0.0, 0.0}));

    RegretTrace b{{1, 2}, {3.0, 2.0}, {}, {}, {}, 0, 0};
    RegretTrace c{{1, 2}, {5.0, 2.0}, {}, {}, {}, 0, 0};
    const Summary s = aggregate({a, b, c});
    EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
    // Sample sd of {1, 3, 5} is 2, so the standard error is 2 / sqrt(3).
    EXPECT_NEAR(s.stderr_[0], 2.0 / std::sqrt(3.0), 1e-15);

    RegretTrace d{{1, 3}, {1.0, 2.0}, {}, {}, {}, 0, 0};
    EXPECT_THROW(aggregate({a, d}), std::invalid_argument);
    EXPECT_THROW(aggregate({}), std::invalid_argument);
}

namespace {
const std::vector<long> kHorizons{1000, 3000, 10000, 30000, 100000, 300000};
std::vector<double> synth(double c, double a, const std::function<double(double)>& f) {
    std::vector<double> y;
    for (long t : kHorizons) y.push_back(a + c * f(static_cast<double>(t)));
    return y;
}
}  // namespace

TEST(FitScaling, RecoversLogCoefficient) {
    const auto y = synth(37.5, 4.0, [](double t) { return std::log(t); });
    const FitReport r = fit_scaling(kHorizons, y, ScalingModel::log());
    EXPECT_NEAR(r.coefficient, 37.5, 1e-9);
    EXPECT_NEAR(r.intercept, 4.0, 1e-7);
    EXPECT_GE(r.r2, 0.999);
    EXPECT_EQ(r.model, "log");
}

TEST(FitScaling, SqrtDataFitsLogPoorly) {
    const auto y = synth(2.0, 0.0, [](double t) { return std::sqrt(t); });
    const FitReport log_fit = fit_scaling(kHorizons, y, ScalingModel::log());
    const FitReport sqrt_fit = fit_scaling(kHorizons, y, ScalingModel::sqrt());
    EXPECT_LT(log_fit.r2, 0.95);
    EXPECT_NEAR(sqrt_fit.r2, 1.0, 1e-12);
    EXPECT_NEAR(sqrt_fit.coefficient, 2.0, 1e-12);
}

TEST(FitScaling, PowerOneThird) {
    const auto y = synth(5.0, 0.0, [](double t) { return std::cbrt(t); });
    const FitReport r = fit_scaling(kHorizons, y, ScalingModel::power(1.0 / 3.0));
    EXPECT_NEAR(r.coefficient, 5.0, 1e-9);
    EXPECT_GE(r.r2, 0.999999);
    const FitReport e = fit_power_exponent(kHorizons, y);
    EXPECT_NEAR(e.coefficient, 1.0 / 3.0, 1e-12);
}

TEST(FitScaling, InsufficientSpan) {
    EXPECT_THROW(fit_scaling({10, 20, 30, 40}, {1, 2, 3, 4}, ScalingModel::log()), InsufficientSpan);
    EXPECT_THROW(fit_scaling({10, 20, 30, 40, 50}, {1, 2, 3, 4, 5}, ScalingModel::log()), InsufficientSpan);
    EXPECT_NO_THROW(fit_scaling({10, 20, 30, 40, 1000}, {1, 2, 3, 4, 5}, ScalingModel::log()));
}

TEST(Persistence, CsvFormat) {
    RegretTrace tr{{1, 2}, {0.1, 0.30000000000000004}, {0.5, 0.25}, {1.0, 0.5}, {0.125, 0.0}, 0, 0};
    std::ostringstream os;
    write_trace_csv(os, "abc", {tr});
    EXPECT_EQ(os.str(),
              "run_id,replication,t,cum_regret,omega,eta,gamma\n"
              "abc,0,1,0.10000000000000001,0.5,1,0.125\n"
              "abc,0,2,0.30000000000000004,0.25,0.5,0\n");
}

TEST(Persistence, ConfigRoundTripAndDigest) {
    const nlohmann::json j = {{"instance", margin_instance()},
                              {"algorithm", {{"name", "realftrl"}}},
                              {"T", 500},
                              {"replications", 3},
                              {"base_seed", 11},
                              {"record_every", 50}};
    const RunConfig cfg = run_config_from_json(j);
    EXPECT_EQ(cfg.algorithm.name, "realftrl");
    EXPECT_EQ(cfg.recording.kind, Recording::Kind::Stride);
    const RunConfig back = run_config_from_json(run_config_to_json(cfg));
    EXPECT_EQ(config_digest(cfg), config_digest(back));
    EXPECT_EQ(config_digest(cfg).size(), 16u);
    RunConfig other = cfg;
    other.base_seed = 12;
    EXPECT_NE(config_digest(cfg), config_digest(other));
}

TEST(Persistence, ConfigErrorsNameTheField) {
    auto message = [](const nlohmann::json& j) {
        try {
            run_config_from_json(j);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    const nlohmann::json ok = {{"instance", margin_instance()}, {"T", 100}};
    nlohmann::json j = ok;
    j["T"] = -5;
    EXPECT_NE(message(j).find("'T'"), std::string::npos);
    j = ok;
    j.erase("instance");
    EXPECT_NE(message(j).find("'instance'"), std::string::npos);
    j = ok;
    j["algorithm"] = "nope";
    EXPECT_NE(message(j).find("algorithm"), std::string::npos);
    j = ok;
    j["algorithm"] = {{"name", "lc-tsallis-inf"}, {"alpha", 1.5}};
    EXPECT_NE(message(j).find("alpha"), std::string::npos);
    j = ok;
    j["replications"] = 0;
    EXPECT_NE(message(j).find("'replications'"), std::string::npos);
}

TEST(Persistence, SummaryJsonRoundTrip) {
    Summary s{{10, 100, 1000}, {1.5, 2.25, 3.125}, {0.1, 0.2, 0.3}};
    const FitReport f{"log", 1.0, 2.0, 0.9};
    const nlohmann::json j = summary_to_json("deadbeef", s, {f});
    EXPECT_EQ(j["config_digest"], "deadbeef");
    EXPECT_EQ(j["fits"][0]["model"], "log");
    const Summary back = summary_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.rounds, s.rounds);
    EXPECT_EQ(back.mean, s.mean);
    EXPECT_EQ(back.stderr_, s.stderr_);
}

TEST(Persistence, DefaultFitsNeedSpan) {
    Summary shortrun{{1, 2, 4, 8}, {1, 2, 3, 4}, {0, 0, 0, 0}};
    EXPECT_TRUE(default_fits(shortrun).empty());
    Summary longrun{{1, 16, 64, 256, 1024, 4096}, {0, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 0, 0}};
    const auto fits = default_fits(longrun);
    ASSERT_EQ(fits.size(), 2u);
    EXPECT_EQ(fits[0].model, "log");
    EXPECT_EQ(fits[1].model, "sqrt");
}
