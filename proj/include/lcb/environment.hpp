#pragma once

// Runtime environment shared by every regime: a model, a palette of loss
// parameters with a per-round schedule, a noise model, and a JSON regime block
// carrying the construction parameters and certificates.

#include "lcb/environments.hpp"
#include "lcb/model.hpp"
#include "lcb/transform.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace lcb {

struct Environment {
    FiniteContextModel model;
    std::vector<Vector> palette;
    std::vector<std::uint32_t> index;  // empty: palette[0] every round
    NoiseSpec noise;
    nlohmann::json regime = nlohmann::json::object();

    const Vector& theta(long t) const {
        if (index.empty()) return palette.front();
        return palette[index.at(static_cast<std::size_t>(t - 1))];
    }
    long scripted_horizon() const noexcept { return static_cast<long>(index.size()); }
    ParameterSet params() const { return ParameterSet{palette, model.loss_margin()}; }
};

/// How many times each palette entry is used over rounds 1..T.
inline std::vector<long> palette_counts(const Environment& env, long T) {
    std::vector<long> counts(env.palette.size(), 0);
    if (env.index.empty()) {
        counts[0] = T;
        return counts;
    }
    if (T > env.scripted_horizon()) throw ContractViolation("environment script is shorter than the horizon");
    for (long t = 0; t < T; ++t) ++counts[env.index[static_cast<std::size_t>(t)]];
    return counts;
}

/// rho*_T(x) = argmin_a sum_t <phi(a, x), theta_t>, lowest index on ties.
inline std::vector<int> optimal_policy(const Environment& env, long T) {
    const auto counts = palette_counts(env, T);
    Vector total = Vector::Zero(env.model.d());
    for (std::size_t i = 0; i < counts.size(); ++i) total += static_cast<double>(counts[i]) * env.palette[i];
    std::vector<int> rho(static_cast<std::size_t>(env.model.S()), 0);
    for (int x = 0; x < env.model.S(); ++x) {
        const Vector sums = env.model.context_features(x).transpose() * total;
        int best = 0;
        for (int a = 1; a < env.model.K(); ++a)
            if (sums(a) < sums(best)) best = a;
        rho[static_cast<std::size_t>(x)] = best;
    }
    return rho;
}

inline void validate_environment(const Environment& env) {
    if (env.palette.empty()) throw ContractViolation("environment has no loss parameters");
    for (std::uint32_t i : env.index)
        if (i >= env.palette.size()) throw ContractViolation("environment schedule indexes past the palette");
    check_noise(env.noise, env.model.loss_margin());
    const auto problems = validate_instance(env.model, env.params());
    if (!problems.empty()) throw ContractViolation("invalid environment: " + problems.front());
}

// ---------------------------------------------------------------------------
// Typed regimes -> Environment

inline nlohmann::json beta_to_json(double beta) {
    if (std::isinf(beta)) return "inf";
    return beta;
}

inline Environment to_environment(const MarginInstance& inst) {
    Environment env{inst.model, {inst.base.theta0}, {}, inst.base.noise, {}};
    const auto violations = check_margin_condition(inst.model.g(), inst.base.gap_table, inst.beta, inst.delta_star);
    env.regime = {{"regime", "stochastic"},
                  {"beta", beta_to_json(inst.beta)},
                  {"delta_star", inst.delta_star},
                  {"noise", noise_to_json(inst.base.noise)},
                  {"gaps", inst.base.gap_table},
                  {"opt_arm", inst.base.opt_arm},
                  {"certificate", {{"kind", "margin"}, {"violations", violations.size()}}}};
    return env;
}

inline Environment to_environment(const FiniteContextModel& m, const AdversarialScript& script, NoiseSpec noise) {
    Environment env{m, script.palette, script.index, noise, {}};
    env.regime = {{"regime", "adversarial"}, {"label", script.label}, {"noise", noise_to_json(noise)}};
    return env;
}

inline Environment to_environment(const FiniteContextModel& m, const CorruptedEnv& c) {
    Environment env{m, {c.base.theta0, c.corrupt_theta}, {}, c.base.noise, {}};
    env.index.assign(static_cast<std::size_t>(c.T), 0);
    for (long t : c.corruption_rounds) env.index[static_cast<std::size_t>(t - 1)] = 1;
    env.regime = {{"regime", "corrupted"},
                  {"beta", "inf"},
                  {"delta_star", c.delta_star},
                  {"C", c.budget_C},
                  {"pattern", c.pattern.kind == CorruptionPattern::Kind::Prefix ? "prefix" : "scattered"},
                  {"target", c.pattern.target == CorruptionPattern::Target::Flip ? "flip" : "amplify"},
                  {"noise", noise_to_json(c.base.noise)},
                  {"corrupted_rounds", c.corruption_rounds.size()},
                  {"certificate",
                   {{"kind", "corruption"}, {"total", c.certificate_total()}, {"limit", 0.5 * c.budget_C}}}};
    return env;
}

inline Environment to_environment(const DepInstance& dep, NoiseSpec noise = {}) {
    Environment env{dep.model, dep.params.thetas, {}, noise, {}};
    if (env.palette.size() > 1) {
        env.index.resize(env.palette.size());
        for (std::size_t i = 0; i < env.index.size(); ++i) env.index[i] = static_cast<std::uint32_t>(i);
    }
    env.regime = {{"regime", env.palette.size() > 1 ? "adversarial" : "stochastic"}, {"noise", noise_to_json(noise)}};
    return env;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json environment_to_json(const Environment& env) {
    nlohmann::json j = instance_to_json(env.model);
    nlohmann::json thetas = nlohmann::json::array();
    for (const Vector& th : env.palette) thetas.push_back(vector_to_json(th));
    j["thetas"] = std::move(thetas);
    if (!env.index.empty()) j["schedule"] = env.index;
    j["regime"] = env.regime;
    j["regime"]["noise"] = noise_to_json(env.noise);
    return j;
}

inline double beta_from_json(const nlohmann::json& j) {
    if (!j.contains("beta") || j["beta"].is_null()) return std::numeric_limits<double>::infinity();
    const auto& b = j["beta"];
    if (b.is_string()) {
        const auto s = b.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("field 'beta' must be a number or \"inf\"");
    }
    if (!b.is_number()) throw std::invalid_argument("field 'beta' must be a number or \"inf\"");
    return b.get<double>();
}

/// Smallest period >= sqrt(T) whose phase count is odd with a final phase at
/// least half full, so the first parameter leads by a sizeable margin overall.
inline long sqrt_switching_period(long T) {
    long p = std::max(1L, static_cast<long>(std::llround(std::sqrt(static_cast<double>(T)))));
    for (;; ++p) {
        const long phases = (T + p - 1) / p;
        const long last = T - (phases - 1) * p;
        if (phases % 2 == 1 && 2 * last >= p) return p;
        if (p >= T) return T;
    }
}

namespace detail {
inline MarginInstance margin_from_json(const nlohmann::json& j, double beta) {
    const int S = require_int(j, "S");
    const int K = require_int(j, "K");
    const int d = require_int(j, "d");
    const double delta_star = require_number(j, "delta_star");
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    const double margin = j.value("loss_margin", 0.0);
    const NoiseSpec noise = noise_from_json(j.value("noise", nlohmann::json()));
    return make_margin_instance(S, K, d, beta, delta_star, seed, margin, noise);
}
}  // namespace detail

/// Builds an environment from an instance spec. Either a generator block
/// ({"generator": "margin" | "switching" | "corrupted" | "indep", ...}) or an
/// explicit instance document with "thetas" (and optionally "schedule").
inline Environment environment_from_json(const nlohmann::json& j, long T) {
    if (!j.is_object()) throw std::invalid_argument("field 'instance' must be an object");
    if (j.contains("generator")) {
        const std::string gen = j["generator"].get<std::string>();
        if (gen == "margin") {
            return to_environment(detail::margin_from_json(j, beta_from_json(j)));
        }
        if (gen == "switching") {
            const MarginInstance base = detail::margin_from_json(j, std::numeric_limits<double>::infinity());
            long period = 0;
            const auto& p = detail::require(j, "period");
            if (p.is_string() && p.get<std::string>() == "sqrt")
                period = sqrt_switching_period(T);
            else if (p.is_number_integer())
                period = p.get<long>();
            else
                throw std::invalid_argument("field 'period' must be an integer or \"sqrt\"");
            const double scale_b = j.value("base_b_scale", -1.0);
            const Vector theta_b = scale_b * base.base.theta0;
            const auto script =
                make_switching_adversary(base.model, base.base.theta0, theta_b, period, T, base.model.loss_margin());
            Environment env = to_environment(base.model, script, base.base.noise);
            env.regime["period"] = period;
            env.regime["delta_star"] = base.delta_star;
            env.regime["base_b_scale"] = scale_b;
            return env;
        }
        if (gen == "corrupted") {
            const MarginInstance base = detail::margin_from_json(j, std::numeric_limits<double>::infinity());
            const double C = detail::require_number(j, "C");
            CorruptionPattern pattern;
            const std::string kind = j.value("pattern", std::string("prefix"));
            if (kind == "scattered")
                pattern.kind = CorruptionPattern::Kind::Scattered;
            else if (kind != "prefix")
                throw std::invalid_argument("field 'pattern' must be prefix or scattered");
            pattern.seed = j.value("pattern_seed", std::uint64_t{0});
            const std::string target = j.value("target", std::string("flip"));
            if (target == "amplify")
                pattern.target = CorruptionPattern::Target::Amplify;
            else if (target != "flip")
                throw std::invalid_argument("field 'target' must be flip or amplify");
            const CorruptedEnv c = make_corrupted(base.model, base.base, base.delta_star, C, pattern, T);
            return to_environment(base.model, c);
        }
        if (gen == "indep") {
            const IndepInstance inst = indep_from_json(j);
            return to_environment(indep_to_dep(inst), noise_from_json(j.value("noise", nlohmann::json())));
        }
        throw std::invalid_argument("field 'generator' must be margin, switching, corrupted or indep");
    }
    if (j.contains("phi_tilde")) {
        const IndepInstance inst = indep_from_json(j);
        return to_environment(indep_to_dep(inst), noise_from_json(j.value("noise", nlohmann::json())));
    }
    Environment env{instance_from_json(j), {}, {}, {}, {}};
    const auto& thetas = detail::require(j, "thetas");
    if (!thetas.is_array() || thetas.empty()) throw std::invalid_argument("field 'thetas' must be a non-empty array");
    for (const auto& th : thetas) env.palette.push_back(vector_from_json(th, "thetas"));
    if (j.contains("schedule")) env.index = j["schedule"].get<std::vector<std::uint32_t>>();
    nlohmann::json regime = j.value("regime", nlohmann::json::object());
    env.noise = noise_from_json(j.contains("noise") ? j["noise"] : regime.value("noise", nlohmann::json()));
    env.regime = regime;
    return env;
}

}  // namespace lcb
