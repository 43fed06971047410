#pragma once

// Loss-parameter sequences for the three regimes, each carrying a
// certificate that its regime definition holds on the concrete instance:
//   - stochastic with a margin condition (fixed theta_0, gap profile),
//   - oblivious adversarial (switching script),
//   - stochastic with a corruption budget C (self-bounding regime).

#include "lcb/model.hpp"
#include "lcb/numerics.hpp"
#include "lcb/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace lcb {

class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Noise

struct NoiseSpec {
    enum class Kind { None, Rademacher, Uniform };
    Kind kind = Kind::None;
    double scale = 0.0;
};

inline std::string to_string(NoiseSpec::Kind k) {
    switch (k) {
        case NoiseSpec::Kind::None: return "none";
        case NoiseSpec::Kind::Rademacher: return "rademacher";
        case NoiseSpec::Kind::Uniform: return "uniform";
    }
    return "none";
}

inline void check_noise(const NoiseSpec& spec, double loss_margin) {
    if (!(spec.scale >= 0.0)) throw ContractViolation("noise scale must be non-negative");
    if (spec.kind != NoiseSpec::Kind::None && spec.scale > loss_margin + 1e-15) {
        std::ostringstream msg;
        msg << "noise scale " << spec.scale << " exceeds loss_margin " << loss_margin;
        throw ContractViolation(msg.str());
    }
}

/// Zero-mean draw with |eps| <= scale.
inline double sample_noise(const NoiseSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case NoiseSpec::Kind::None: return 0.0;
        case NoiseSpec::Kind::Rademacher: return uniform01(rng) < 0.5 ? spec.scale : -spec.scale;
        case NoiseSpec::Kind::Uniform: return spec.scale * (2.0 * uniform01(rng) - 1.0);
    }
    return 0.0;
}

inline double sample_noise(const NoiseSpec& spec, double loss_margin, Rng& rng) {
    check_noise(spec, loss_margin);
    return sample_noise(spec, rng);
}

inline nlohmann::json noise_to_json(const NoiseSpec& n) {
    return {{"kind", to_string(n.kind)}, {"scale", n.scale}};
}

inline NoiseSpec noise_from_json(const nlohmann::json& j) {
    NoiseSpec n;
    if (j.is_null()) return n;
    if (j.is_string()) {
        if (j.get<std::string>() != "none") throw std::invalid_argument("field 'noise' must be an object");
        return n;
    }
    const std::string kind = j.value("kind", std::string("none"));
    if (kind == "none")
        n.kind = NoiseSpec::Kind::None;
    else if (kind == "rademacher")
        n.kind = NoiseSpec::Kind::Rademacher;
    else if (kind == "uniform")
        n.kind = NoiseSpec::Kind::Uniform;
    else
        throw std::invalid_argument("field 'noise.kind' must be none, rademacher or uniform");
    n.scale = j.value("scale", 0.0);
    return n;
}

// ---------------------------------------------------------------------------
// Gaps

struct GapProfile {
    std::vector<double> gap;   // Delta(x); +inf when K = 1
    std::vector<int> opt_arm;  // rho*(x), lowest index on ties
};

/// Brute-force best arm and gap per context under a fixed parameter.
inline GapProfile compute_gaps(const FiniteContextModel& m, const Vector& theta) {
    GapProfile p;
    for (int x = 0; x < m.S(); ++x) {
        const Vector losses = m.context_features(x).transpose() * theta;
        int best = 0;
        for (int a = 1; a < m.K(); ++a)
            if (losses(a) < losses(best)) best = a;
        double gap = std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.K(); ++a)
            if (a != best) gap = std::min(gap, losses(a) - losses(best));
        p.gap.push_back(gap);
        p.opt_arm.push_back(best);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Stochastic regime

struct StochasticEnv {
    Vector theta0;
    NoiseSpec noise;
    std::vector<double> gap_table;
    std::vector<int> opt_arm;
};

struct MarginInstance {
    FiniteContextModel model;
    StochasticEnv base;
    double beta = std::numeric_limits<double>::infinity();
    double delta_star = 0.0;
};

struct MarginViolation {
    double h = 0.0;
    double mass = 0.0;
    double bound = 0.0;
};

/// Checks P(Delta(X) <= h) <= (h / Delta*)^beta / 2 at every breakpoint in
/// [0, Delta*]. For beta = inf the requirement is Delta(x) >= Delta* for all x.
inline std::vector<MarginViolation> check_margin_condition(const std::vector<double>& g,
                                                           const std::vector<double>& gaps, double beta,
                                                           double delta_star) {
    std::vector<MarginViolation> out;
    const bool infinite = std::isinf(beta);
    std::vector<double> points{0.0};
    for (double gap : gaps)
        if (gap <= delta_star) points.push_back(gap);
    if (!infinite) points.push_back(delta_star);
    for (double h : points) {
        if (infinite && h >= delta_star) continue;
        double mass = 0.0;
        for (std::size_t x = 0; x < gaps.size(); ++x)
            if (gaps[x] <= h) mass += g[x];
        const double bound = infinite ? 0.0 : 0.5 * std::pow(h / delta_star, beta);
        if (mass > bound + 1e-12) out.push_back({h, mass, bound});
    }
    return out;
}

/// Uniform context distribution with a prescribed gap profile.
///
/// theta_0 = e_1, so the first feature coordinate of phi(a, x) is its
/// expected loss; the remaining coordinates carry per-arm directions shared by
/// all contexts. Context i (1-based) gets gap Delta* (2i/S)^(1/beta) when
/// 2i < S and a gap above Delta* otherwise; with beta = inf every gap is
/// Delta*. One challenger per context sits at exactly that gap, every other
/// arm at least max(Delta(x), Delta*) above the optimum.
inline MarginInstance make_margin_instance(int S, int K, int d, double beta, double delta_star,
                                           std::uint64_t seed, double loss_margin = 0.0,
                                           NoiseSpec noise = {}) {
    if (S < 2 || K < 2 || d < 2) throw ContractViolation("make_margin_instance: needs S, K, d >= 2");
    if (!(beta > 0.0)) throw ContractViolation("make_margin_instance: beta must be positive");
    if (!(delta_star > 0.0 && delta_star <= 0.5))
        throw ContractViolation("make_margin_instance: delta_star must lie in (0, 0.5]");
    check_noise(noise, loss_margin);

    Rng rng(seed);
    const bool infinite = std::isinf(beta);
    std::vector<double> target(static_cast<std::size_t>(S));
    for (int i = 1; i <= S; ++i) {
        double gap = delta_star;
        if (!infinite) {
            const double ratio = 2.0 * i / S;
            gap = ratio < 1.0 ? delta_star * std::pow(ratio, 1.0 / beta) * (1.0 + 1e-9)
                              : delta_star * (1.0 + 0.5 * (ratio - 1.0) + 1e-9);
        }
        target[static_cast<std::size_t>(i - 1)] = gap;
    }

    // Arm directions in the coordinates orthogonal to theta_0.
    Matrix arm_dirs(d - 1, K);
    for (int a = 0; a < K; ++a)
        for (int j = 0; j < d - 1; ++j) arm_dirs(j, a) = uniform01(rng) - 0.5;

    std::vector<std::vector<double>> arm_gaps(static_cast<std::size_t>(S), std::vector<double>(K, 0.0));
    std::vector<int> opt(static_cast<std::size_t>(S));
    double spread = 0.0;
    for (int x = 0; x < S; ++x) {
        const int best = std::min(K - 1, static_cast<int>(uniform01(rng) * K));
        int challenger = std::min(K - 2, static_cast<int>(uniform01(rng) * (K - 1)));
        if (challenger >= best) ++challenger;
        const double gx = target[static_cast<std::size_t>(x)];
        for (int a = 0; a < K; ++a) {
            double gap = 0.0;
            if (a == challenger)
                gap = gx;
            else if (a != best)
                gap = std::max(gx, delta_star) + 0.5 * delta_star * uniform01(rng);
            arm_gaps[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)] = gap;
            spread = std::max(spread, gap);
        }
        opt[static_cast<std::size_t>(x)] = best;
    }
    const double bound = 1.0 - loss_margin;
    if (spread > 2.0 * bound) {
        std::ostringstream msg;
        msg << "make_margin_instance: gap spread " << spread << " exceeds the loss budget " << 2.0 * bound;
        throw ConstructionError(msg.str());
    }
    const double offset = -0.5 * spread;

    Matrix features(d, static_cast<Eigen::Index>(S) * K);
    for (int x = 0; x < S; ++x)
        for (int a = 0; a < K; ++a) {
            const Eigen::Index col = static_cast<Eigen::Index>(x) * K + a;
            features(0, col) = offset + arm_gaps[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
            features.block(1, col, d - 1, 1) = arm_dirs.col(a);
        }

    FiniteContextModel model(S, K, d, std::vector<double>(static_cast<std::size_t>(S), 1.0 / S),
                             static_cast<double>(S), std::move(features), loss_margin);
    Vector theta0 = Vector::Zero(d);
    theta0(0) = 1.0;

    GapProfile profile = compute_gaps(model, theta0);
    if (profile.opt_arm != opt) throw ConstructionError("make_margin_instance: optimal arm mismatch");

    // The certificate is the source of truth: widen any failing gap and retry.
    for (int attempt = 0; attempt < 100; ++attempt) {
        const auto bad = check_margin_condition(model.g(), profile.gap, beta, delta_star);
        if (bad.empty()) break;
        if (attempt == 99) throw ConstructionError("make_margin_instance: margin condition cannot be met");
        Matrix f = model.features();
        for (int x = 0; x < S; ++x)
            for (int a = 0; a < K; ++a)
                if (a != opt[static_cast<std::size_t>(x)])
                    f(0, static_cast<Eigen::Index>(x) * K + a) += 1e-9;
        model = FiniteContextModel(S, K, d, model.g(), model.L(), std::move(f), loss_margin);
        profile = compute_gaps(model, theta0);
    }

    const auto problems = validate_instance(model, ParameterSet{{theta0}, loss_margin});
    if (!problems.empty()) throw ConstructionError("make_margin_instance: " + problems.front());

    StochasticEnv base{theta0, noise, profile.gap, profile.opt_arm};
    return MarginInstance{std::move(model), std::move(base), beta, delta_star};
}

// ---------------------------------------------------------------------------
// Oblivious adversarial scripts

/// Parameter sequence stored as a palette of distinct vectors plus a per-round
/// index into it; round t (1-based) uses palette[index[t-1]].
struct AdversarialScript {
    std::vector<Vector> palette;
    std::vector<std::uint32_t> index;
    std::string label;

    long horizon() const noexcept { return static_cast<long>(index.size()); }
    const Vector& theta(long t) const { return palette[index.at(static_cast<std::size_t>(t - 1))]; }
};

/// theta_t = base_a when ceil(t / period) is odd, base_b otherwise.
inline AdversarialScript make_switching_adversary(const FiniteContextModel& m, const Vector& base_a,
                                                  const Vector& base_b, long period, long T,
                                                  double loss_margin = 0.0) {
    if (period < 1) throw ContractViolation("make_switching_adversary: period must be >= 1");
    if (T < 1) throw ContractViolation("make_switching_adversary: T must be >= 1");
    const auto problems = validate_instance(m, ParameterSet{{base_a, base_b}, loss_margin});
    for (const auto& p : problems)
        if (p.rfind("bounded loss", 0) == 0 || p.rfind("theta", 0) == 0)
            throw ContractViolation("make_switching_adversary: " + p);
    AdversarialScript s;
    s.palette = {base_a, base_b};
    s.label = "switching";
    s.index.resize(static_cast<std::size_t>(T));
    for (long t = 1; t <= T; ++t) s.index[static_cast<std::size_t>(t - 1)] = ((t - 1) / period) % 2 == 0 ? 0 : 1;
    return s;
}

// ---------------------------------------------------------------------------
// Corruption

struct CorruptionPattern {
    enum class Kind { Prefix, Scattered };
    // Flip: theta_0 -> -theta_0, every ranking reverses.
    // Amplify: theta_0 -> k theta_0 with the largest bounded-valid k, every
    // gap grows by the factor k.
    enum class Target { Flip, Amplify };
    Kind kind = Kind::Prefix;
    Target target = Target::Flip;
    std::uint64_t seed = 0;
};

struct CorruptedEnv {
    StochasticEnv base;
    double delta_star = 0.0;
    std::vector<long> corruption_rounds;  // sorted, 1-based
    Vector corrupt_theta;
    double budget_C = 0.0;
    std::vector<double> certificate;  // per corrupted round perturbation
    CorruptionPattern pattern;
    long T = 0;

    bool corrupted(long t) const {
        return std::binary_search(corruption_rounds.begin(), corruption_rounds.end(), t);
    }
    const Vector& theta(long t) const { return corrupted(t) ? corrupt_theta : base.theta0; }
    double certificate_total() const {
        return std::accumulate(certificate.begin(), certificate.end(), 0.0);
    }
};

/// Largest change in any expected loss when theta_0 is replaced by theta.
inline double loss_perturbation(const FiniteContextModel& m, const Vector& theta0, const Vector& theta) {
    return (m.features().transpose() * (theta - theta0)).cwiseAbs().maxCoeff();
}

/// Replaces theta_0 by the pattern's target parameter on as many rounds as the
/// budget allows: the summed per-round perturbation stays <= C/2.
inline CorruptedEnv make_corrupted(const FiniteContextModel& m, const StochasticEnv& base, double delta_star,
                                   double C, CorruptionPattern pattern, long T) {
    if (!(C >= 0.0)) throw ContractViolation("make_corrupted: C must be non-negative");
    if (T < 1) throw ContractViolation("make_corrupted: T must be >= 1");
    for (double gap : base.gap_table)
        if (gap < delta_star - 1e-12)
            throw ContractViolation("make_corrupted: base instance needs every gap >= delta_star");

    CorruptedEnv env;
    env.base = base;
    env.delta_star = delta_star;
    env.budget_C = C;
    env.pattern = pattern;
    env.T = T;
    if (pattern.target == CorruptionPattern::Target::Flip) {
        env.corrupt_theta = -base.theta0;
    } else {
        const double peak = (m.features().transpose() * base.theta0).cwiseAbs().maxCoeff();
        if (!(peak > 0.0)) throw ConstructionError("make_corrupted: base losses are all zero");
        env.corrupt_theta = ((1.0 - m.loss_margin()) / peak) * base.theta0;
    }
    const double per_round = loss_perturbation(m, base.theta0, env.corrupt_theta);
    long n = 0;
    if (C > 0.0) {
        if (!(per_round > 0.0))
            throw ConstructionError("make_corrupted: the corruption does not change any loss");
        n = std::min<long>(T, static_cast<long>(std::floor(0.5 * C / per_round)));
    }
    if (pattern.kind == CorruptionPattern::Kind::Prefix) {
        for (long t = 1; t <= n; ++t) env.corruption_rounds.push_back(t);
    } else {
        std::vector<long> all(static_cast<std::size_t>(T));
        std::iota(all.begin(), all.end(), 1L);
        Rng rng(pattern.seed);
        // Partial Fisher-Yates with the portable uniform draw.
        for (long i = 0; i < n; ++i) {
            const long j = i + std::min<long>(T - i - 1, static_cast<long>(uniform01(rng) * (T - i)));
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
        }
        env.corruption_rounds.assign(all.begin(), all.begin() + n);
        std::sort(env.corruption_rounds.begin(), env.corruption_rounds.end());
    }
    env.certificate.assign(static_cast<std::size_t>(n), per_round);
    if (env.certificate_total() > 0.5 * C + 1e-9)
        throw ConstructionError("make_corrupted: budget infeasible for the requested pattern");
    return env;
}

}  // namespace lcb
