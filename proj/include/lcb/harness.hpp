#pragma once

// Experiment runner: replications with per-replication seeds, exact expected
// pseudo-regret against rho*_T, aggregation, scaling fits and persistence.

#include "lcb/algorithms.hpp"
#include "lcb/environment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lcb {

struct Recording {
    enum class Kind { Geometric, Stride, List };
    Kind kind = Kind::Geometric;
    long stride = 1;
    std::vector<long> rounds;  // Kind::List
};

/// Sorted recorded round indices in [1, T]; T is always included.
inline std::vector<long> recorded_rounds(const Recording& rec, long T) {
    std::vector<long> out;
    switch (rec.kind) {
    case Recording::Kind::Geometric:
        for (long t = 1; t < T; t *= 2) out.push_back(t);
        break;
    case Recording::Kind::Stride:
        if (rec.stride < 1) throw std::invalid_argument("field 'record_every' must be >= 1");
        for (long t = rec.stride; t < T; t += rec.stride) out.push_back(t);
        break;
    case Recording::Kind::List:
        for (long t : rec.rounds) {
            if (t < 1) throw std::invalid_argument("field 'record_at' entries must be >= 1");
            if (t < T) out.push_back(t);
        }
        break;
    }
    out.push_back(T);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct Diagnostics {
    bool omega = true;
    bool bound_checks = false;
};

struct RunConfig {
    nlohmann::json instance;
    AlgorithmSpec algorithm;
    long T = 1000;
    int replications = 1;
    std::uint64_t base_seed = 0;
    Recording recording;
    Diagnostics diagnostics;
};

struct RegretTrace {
    std::vector<long> rounds;
    std::vector<double> cum_regret;
    std::vector<double> omega;
    std::vector<double> eta;
    std::vector<double> gamma;
    long bound_violations = 0;
    long bound_checks = 0;
};

/// Runtime failure inside a replication, tagged with where it happened.
class RunError : public std::runtime_error {
public:
    RunError(int replication, long round, int context, const std::string& what)
        : std::runtime_error("replication " + std::to_string(replication) + ", round " + std::to_string(round) +
                             ", context " + std::to_string(context) + ": " + what) {}
};

// ---------------------------------------------------------------------------
// Regret accounting

/// Sum_x g(x) Sum_a pi(a|x) <phi(a, x) - phi(rho(x), x), theta>, exact.
inline double expected_round_regret(const FiniteContextModel& m, const PolicyTable& pi, const Vector& theta,
                                    const std::vector<int>& rho) {
    if (pi.rows() != m.S() || pi.cols() != m.K() || theta.size() != m.d() || static_cast<int>(rho.size()) != m.S())
        throw ContractViolation("expected_round_regret: dimension mismatch");
    CompensatedSum total;
    for (int x = 0; x < m.S(); ++x) {
        if (m.g(x) == 0.0) continue;
        const Vector losses = m.context_features(x).transpose() * theta;
        const double best = losses(rho[static_cast<std::size_t>(x)]);
        double inner = 0.0;
        for (int a = 0; a < m.K(); ++a) inner += pi(x, a) * (losses(a) - best);
        total.add(m.g(x) * inner);
    }
    return total.value();
}

namespace detail {

/// Per-palette-entry gap tables Delta(a|x) = loss(a, x) - loss(rho(x), x),
/// weighted by g(x), so each round costs S*K.
inline std::vector<RowMatrix> weighted_gap_tables(const Environment& env, const std::vector<int>& rho) {
    const auto& m = env.model;
    std::vector<RowMatrix> out;
    for (const Vector& theta : env.palette) {
        RowMatrix tab(m.S(), m.K());
        for (int x = 0; x < m.S(); ++x) {
            const Vector losses = m.context_features(x).transpose() * theta;
            const double best = losses(rho[static_cast<std::size_t>(x)]);
            for (int a = 0; a < m.K(); ++a) tab(x, a) = m.g(x) * (losses(a) - best);
        }
        out.push_back(std::move(tab));
    }
    return out;
}

inline double table_regret(const RowMatrix& weighted_gaps, const PolicyTable& pi) {
    CompensatedSum total;
    for (int x = 0; x < weighted_gaps.rows(); ++x) total.add(weighted_gaps.row(x).dot(pi.row(x)));
    return total.value();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Running

struct PreparedRun {
    Environment env;
    std::optional<ExplorationPolicy> exploration;
    std::vector<int> rho;
    std::vector<long> rounds;
};

inline PreparedRun prepare_run(const RunConfig& cfg) {
    if (cfg.T < 1) throw std::invalid_argument("field 'T' must be >= 1");
    if (cfg.replications < 1) throw std::invalid_argument("field 'replications' must be >= 1");
    PreparedRun prep{environment_from_json(cfg.instance, cfg.T), std::nullopt, {}, {}};
    validate_environment(prep.env);
    if (!prep.env.index.empty() && prep.env.scripted_horizon() < cfg.T)
        throw std::invalid_argument("field 'T' exceeds the length of the instance schedule");
    if (needs_exploration(cfg.algorithm))
        prep.exploration = build_exploration_policy(prep.env.model, cfg.algorithm.design_eps);
    prep.rho = optimal_policy(prep.env, cfg.T);
    prep.rounds = recorded_rounds(cfg.recording, cfg.T);
    return prep;
}

/// One replication of the interaction protocol. Per round the RNG is drawn in
/// a fixed order: context, arm, noise.
inline RegretTrace run_replication(const RunConfig& cfg, const PreparedRun& prep, int replication) {
    const FiniteContextModel& m = prep.env.model;
    Rng rng(cfg.base_seed + static_cast<std::uint64_t>(replication));
    Algorithm alg = make_algorithm(cfg.algorithm, m, prep.exploration, cfg.T);
    const auto gaps = detail::weighted_gap_tables(prep.env, prep.rho);
    const Vector g = Eigen::Map<const Vector>(m.g().data(), m.S());

    RegretTrace trace;
    trace.rounds = prep.rounds;
    const std::size_t n = prep.rounds.size();
    trace.cum_regret.reserve(n);
    trace.eta.reserve(n);
    trace.gamma.reserve(n);
    if (cfg.diagnostics.omega) trace.omega.reserve(n);

    CompensatedSum cum;
    std::size_t next = 0;
    for (long t = 1; t <= cfg.T; ++t) {
        const int x = sample_index(g, uniform01(rng));
        try {
            RoundOutput out = std::visit([&](auto& a) { return a.round(m, x, rng); }, alg);
            const std::size_t pal = prep.env.index.empty() ? 0 : prep.env.index[static_cast<std::size_t>(t - 1)];
            cum.add(detail::table_regret(gaps[pal], out.pi_table));
            const double noise = sample_noise(prep.env.noise, rng);
            const double loss = m.feature(out.chosen_arm, x).dot(prep.env.palette[pal]) + noise;
            std::visit([&](auto& a) { a.update(m, out, loss); }, alg);

            if (cfg.diagnostics.bound_checks) {
                if (auto* lc = std::get_if<LcTsallisInf>(&alg)) {
                    ++trace.bound_checks;
                    const auto viol = check_loss_estimate_bound(m, lc->exploration().lambda, out.gamma, out.q_table,
                                                                *lc->last_estimate());
                    trace.bound_violations += static_cast<long>(viol.size());
                }
            }
            if (next < n && prep.rounds[next] == t) {
                trace.cum_regret.push_back(cum.value());
                trace.eta.push_back(out.eta);
                trace.gamma.push_back(out.gamma);
                if (cfg.diagnostics.omega) trace.omega.push_back(out.omega);
                ++next;
            }
        } catch (const RunError&) {
            throw;
        } catch (const std::exception& e) {
            throw RunError(replication, t, x, e.what());
        }
    }
    return trace;
}

/// Runs every replication, up to `jobs` at a time. Results are ordered by
/// replication index regardless of scheduling.
inline std::vector<RegretTrace> run(const RunConfig& cfg, const PreparedRun& prep, int jobs = 1) {
    std::vector<RegretTrace> traces(static_cast<std::size_t>(cfg.replications));
    const int workers = std::clamp(jobs, 1, cfg.replications);
    if (workers == 1) {
        for (int r = 0; r < cfg.replications; ++r) traces[static_cast<std::size_t>(r)] = run_replication(cfg, prep, r);
        return traces;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int r = next++; r < cfg.replications; r = next++) {
            try {
                traces[static_cast<std::size_t>(r)] = run_replication(cfg, prep, r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = cfg.replications;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return traces;
}

inline std::vector<RegretTrace> run(const RunConfig& cfg, int jobs = 1) { return run(cfg, prepare_run(cfg), jobs); }

// ---------------------------------------------------------------------------
// Aggregation and fits

struct Summary {
    std::vector<long> rounds;
    std::vector<double> mean;
    std::vector<double> stderr_;
};

inline Summary aggregate(const std::vector<RegretTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
    const auto& rounds = traces.front().rounds;
    for (const auto& tr : traces)
        if (tr.rounds != rounds || tr.cum_regret.size() != rounds.size())
            throw std::invalid_argument("aggregate: traces are recorded at different rounds");
    Summary s{rounds, std::vector<double>(rounds.size()), std::vector<double>(rounds.size(), 0.0)};
    const double n = static_cast<double>(traces.size());
    for (std::size_t i = 0; i < rounds.size(); ++i) {
        CompensatedSum sum;
        for (const auto& tr : traces) sum.add(tr.cum_regret[i]);
        const double mean = sum.value() / n;
        s.mean[i] = mean;
        if (traces.size() > 1) {
            CompensatedSum sq;
            for (const auto& tr : traces) sq.add((tr.cum_regret[i] - mean) * (tr.cum_regret[i] - mean));
            s.stderr_[i] = std::sqrt(sq.value() / (n - 1.0) / n);
        }
    }
    return s;
}

struct ScalingModel {
    enum class Kind { Log, Sqrt, Power };
    Kind kind = Kind::Log;
    double p = 0.5;

    static ScalingModel log() { return {Kind::Log, 0.0}; }
    static ScalingModel sqrt() { return {Kind::Sqrt, 0.5}; }
    static ScalingModel power(double p) { return {Kind::Power, p}; }

    double shape(double t) const {
        switch (kind) {
        case Kind::Log: return std::log(t);
        case Kind::Sqrt: return std::sqrt(t);
        case Kind::Power: return std::pow(t, p);
        }
        return 0.0;
    }

    std::string name() const {
        switch (kind) {
        case Kind::Log: return "log";
        case Kind::Sqrt: return "sqrt";
        case Kind::Power: {
            std::ostringstream os;
            os << "power(" << p << ")";
            return os.str();
        }
        }
        return {};
    }
};

struct FitReport {
    std::string model;
    double coefficient = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

class InsufficientSpan : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {
inline void check_span(const std::vector<long>& t) {
    if (t.size() < 5) throw InsufficientSpan("scaling fit needs at least 5 recorded horizons");
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    if (*lo < 1 || static_cast<double>(*hi) < 100.0 * static_cast<double>(*lo))
        throw InsufficientSpan("scaling fit needs horizons spanning at least two decades");
}

/// Ordinary least squares y = a + c*f with R^2 against the mean.
inline FitReport ols(const std::vector<double>& f, const std::vector<double>& y) {
    const double n = static_cast<double>(f.size());
    double fm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        fm += f[i];
        ym += y[i];
    }
    fm /= n;
    ym /= n;
    double sff = 0.0, sfy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        sff += (f[i] - fm) * (f[i] - fm);
        sfy += (f[i] - fm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    FitReport r;
    r.coefficient = sff > 0.0 ? sfy / sff : 0.0;
    r.intercept = ym - r.coefficient * fm;
    double sse = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double e = y[i] - r.intercept - r.coefficient * f[i];
        sse += e * e;
    }
    r.r2 = syy > 0.0 ? 1.0 - sse / syy : (sse == 0.0 ? 1.0 : 0.0);
    return r;
}
}  // namespace detail

/// Least squares of cum_regret(T) on a + c*shape(T).
inline FitReport fit_scaling(const std::vector<long>& rounds, const std::vector<double>& values,
                             const ScalingModel& model) {
    if (rounds.size() != values.size()) throw std::invalid_argument("fit_scaling: length mismatch");
    detail::check_span(rounds);
    std::vector<double> f;
    for (long t : rounds) f.push_back(model.shape(static_cast<double>(t)));
    FitReport r = detail::ols(f, values);
    r.model = model.name();
    return r;
}

inline FitReport fit_scaling(const Summary& s, const ScalingModel& model) {
    return fit_scaling(s.rounds, s.mean, model);
}

/// Slope of log(value) against log(T); values must be positive.
inline FitReport fit_power_exponent(const std::vector<long>& rounds, const std::vector<double>& values) {
    if (rounds.size() != values.size()) throw std::invalid_argument("fit_power_exponent: length mismatch");
    if (rounds.size() < 2) throw InsufficientSpan("power fit needs at least two horizons");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < rounds.size(); ++i) {
        if (!(values[i] > 0.0)) throw std::invalid_argument("fit_power_exponent: values must be positive");
        lx.push_back(std::log(static_cast<double>(rounds[i])));
        ly.push_back(std::log(values[i]));
    }
    FitReport r = detail::ols(lx, ly);
    r.model = "power-exponent";
    return r;
}

/// Restricts a summary to the listed rounds (all of which must be recorded).
inline Summary select_rounds(const Summary& s, const std::vector<long>& rounds) {
    Summary out;
    for (long t : rounds) {
        const auto it = std::find(s.rounds.begin(), s.rounds.end(), t);
        if (it == s.rounds.end()) throw std::invalid_argument("select_rounds: round " + std::to_string(t) + " not recorded");
        const auto i = static_cast<std::size_t>(it - s.rounds.begin());
        out.rounds.push_back(t);
        out.mean.push_back(s.mean[i]);
        out.stderr_.push_back(s.stderr_[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config parsing and persistence

inline AlgorithmSpec algorithm_from_json(const nlohmann::json& j) {
    AlgorithmSpec spec;
    if (j.is_string()) {
        spec.name = j.get<std::string>();
    } else if (j.is_object()) {
        const auto& name = detail::require(j, "name");
        if (!name.is_string()) throw std::invalid_argument("field 'algorithm.name' must be a string");
        spec.name = name.get<std::string>();
        if (j.contains("alpha")) spec.alpha = detail::require_number(j, "alpha");
        if (j.contains("design_eps")) spec.design_eps = detail::require_number(j, "design_eps");
        if (j.contains("finite_support")) {
            if (!j["finite_support"].is_boolean())
                throw std::invalid_argument("field 'algorithm.finite_support' must be a boolean");
            spec.finite_support = j["finite_support"].get<bool>();
        }
    } else {
        throw std::invalid_argument("field 'algorithm' must be a string or an object");
    }
    const auto& names = algorithm_names();
    if (std::find(names.begin(), names.end(), spec.name) == names.end())
        throw std::invalid_argument("field 'algorithm.name': unknown algorithm '" + spec.name + "'");
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw std::invalid_argument("field 'algorithm.alpha' must be in (0, 1)");
    if (!(spec.design_eps > 0.0)) throw std::invalid_argument("field 'algorithm.design_eps' must be positive");
    return spec;
}

inline nlohmann::json algorithm_to_json(const AlgorithmSpec& spec) {
    return {{"name", spec.name},
            {"alpha", spec.alpha},
            {"design_eps", spec.design_eps},
            {"finite_support", spec.finite_support}};
}

namespace detail {
inline long require_positive_long(const nlohmann::json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw std::invalid_argument(std::string("field '") + field + "' must be a positive integer");
    return v.get<long>();
}
}  // namespace detail

/// Parses a run config. `instance_file` paths are resolved by the caller and
/// substituted into "instance" before this is called.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    RunConfig cfg;
    cfg.instance = detail::require(j, "instance");
    if (!cfg.instance.is_object()) throw std::invalid_argument("field 'instance' must be an object");
    cfg.algorithm = algorithm_from_json(j.contains("algorithm") ? j["algorithm"] : nlohmann::json("lc-tsallis-inf"));
    cfg.T = detail::require_positive_long(j, "T");
    cfg.replications = j.contains("replications") ? static_cast<int>(detail::require_positive_long(j, "replications")) : 1;
    if (j.contains("base_seed")) {
        if (!j["base_seed"].is_number_unsigned() && !(j["base_seed"].is_number_integer() && j["base_seed"].get<long long>() >= 0))
            throw std::invalid_argument("field 'base_seed' must be a non-negative integer");
        cfg.base_seed = j["base_seed"].get<std::uint64_t>();
    }
    if (j.contains("record_every")) {
        cfg.recording.kind = Recording::Kind::Stride;
        cfg.recording.stride = detail::require_positive_long(j, "record_every");
    } else if (j.contains("record_at")) {
        cfg.recording.kind = Recording::Kind::List;
        const auto& at = j["record_at"];
        if (!at.is_array()) throw std::invalid_argument("field 'record_at' must be an array of rounds");
        for (const auto& t : at) {
            if (!t.is_number_integer() || t.get<long long>() < 1)
                throw std::invalid_argument("field 'record_at' entries must be positive integers");
            cfg.recording.rounds.push_back(t.get<long>());
        }
    } else if (j.contains("geometric") && !j["geometric"].is_boolean()) {
        throw std::invalid_argument("field 'geometric' must be a boolean");
    }
    if (j.contains("diagnostics")) {
        const auto& d = j["diagnostics"];
        if (!d.is_object()) throw std::invalid_argument("field 'diagnostics' must be an object");
        cfg.diagnostics.omega = d.value("omega", true);
        cfg.diagnostics.bound_checks = d.value("bound_checks", false);
    }
    return cfg;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j{{"instance", cfg.instance},
                     {"algorithm", algorithm_to_json(cfg.algorithm)},
                     {"T", cfg.T},
                     {"replications", cfg.replications},
                     {"base_seed", cfg.base_seed},
                     {"diagnostics", {{"omega", cfg.diagnostics.omega}, {"bound_checks", cfg.diagnostics.bound_checks}}}};
    switch (cfg.recording.kind) {
    case Recording::Kind::Geometric: j["geometric"] = true; break;
    case Recording::Kind::Stride: j["record_every"] = cfg.recording.stride; break;
    case Recording::Kind::List: j["record_at"] = cfg.recording.rounds; break;
    }
    return j;
}

/// FNV-1a over the canonical (key-sorted, compact) serialization.
inline std::string config_digest(const RunConfig& cfg) {
    const std::string text = run_config_to_json(cfg).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One row per recorded round per replication; LF line endings.
inline void write_trace_csv(std::ostream& os, const std::string& run_id, const std::vector<RegretTrace>& traces) {
    os << "run_id,replication,t,cum_regret,omega,eta,gamma\n";
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        for (std::size_t i = 0; i < tr.rounds.size(); ++i) {
            os << run_id << ',' << r << ',' << tr.rounds[i] << ',' << format_double(tr.cum_regret[i]) << ','
               << (tr.omega.empty() ? std::string() : format_double(tr.omega[i])) << ',' << format_double(tr.eta[i])
               << ',' << format_double(tr.gamma[i]) << '\n';
        }
    }
}

inline nlohmann::json fit_to_json(const FitReport& f) {
    return {{"model", f.model}, {"coefficient", f.coefficient}, {"intercept", f.intercept}, {"r2", f.r2}};
}

/// Log and sqrt fits when the recorded rounds allow them (rounds >= 10 only,
/// so the first few warm-up points do not dominate).
inline std::vector<FitReport> default_fits(const Summary& s) {
    Summary tail;
    for (std::size_t i = 0; i < s.rounds.size(); ++i)
        if (s.rounds[i] >= 10) {
            tail.rounds.push_back(s.rounds[i]);
            tail.mean.push_back(s.mean[i]);
            tail.stderr_.push_back(s.stderr_[i]);
        }
    std::vector<FitReport> out;
    try {
        out.push_back(fit_scaling(tail, ScalingModel::log()));
        out.push_back(fit_scaling(tail, ScalingModel::sqrt()));
    } catch (const InsufficientSpan&) {
        out.clear();
    }
    return out;
}

inline nlohmann::json summary_to_json(const std::string& digest, const Summary& s, const std::vector<FitReport>& fits) {
    nlohmann::json per_round = nlohmann::json::array();
    for (std::size_t i = 0; i < s.rounds.size(); ++i)
        per_round.push_back({{"t", s.rounds[i]}, {"mean", s.mean[i]}, {"stderr", s.stderr_[i]}});
    nlohmann::json fj = nlohmann::json::array();
    for (const auto& f : fits) fj.push_back(fit_to_json(f));
    return {{"config_digest", digest}, {"per_round", std::move(per_round)}, {"fits", std::move(fj)}};
}

inline Summary summary_from_json(const nlohmann::json& j) {
    Summary s;
    for (const auto& row : detail::require(j, "per_round")) {
        s.rounds.push_back(detail::require(row, "t").get<long>());
        s.mean.push_back(detail::require_number(row, "mean"));
        s.stderr_.push_back(detail::require_number(row, "stderr"));
    }
    return s;
}

}  // namespace lcb
