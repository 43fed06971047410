#pragma once

// Command implementations behind the lcb_lab binary. Each returns a process
// exit code: 0 ok, 2 configuration error, 3 runtime error.

#include "lcb/harness.hpp"
#include "lcb/report.hpp"
#include "lcb/testing/oracles.hpp"
#include "lcb/transform.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace lcb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct Options {
    std::string config;
    std::string out = ".";
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

/// --jobs default: BANDIT_LAB_JOBS when set to a positive integer, else 1.
inline int default_jobs() {
    if (const char* env = std::getenv("BANDIT_LAB_JOBS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

/// Loads a config and inlines `instance_file` (relative to the config's
/// directory) as `instance`.
inline nlohmann::json load_config(const std::string& path) {
    if (path.empty()) throw ConfigError("missing --config");
    nlohmann::json j = read_json_file(path);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("instance_file")) {
        if (j.contains("instance")) throw ConfigError("fields 'instance' and 'instance_file' are exclusive");
        if (!j["instance_file"].is_string()) throw ConfigError("field 'instance_file' must be a path");
        std::filesystem::path p = j["instance_file"].get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
        j["instance"] = read_json_file(p);
        j.erase("instance_file");
    }
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

/// Maps exceptions to exit codes and prints a one-line diagnostic.
template <class Body>
int guarded(const char* command, Body body) {
    try {
        return body();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << command << ": config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConstructionError& e) {
        std::cerr << command << ": config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::logic_error& e) {
        std::cerr << command << ": config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << command << ": runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

struct CellOutput {
    std::string digest;
    Summary summary;
    std::vector<FitReport> fits;
    nlohmann::json regime;
};

/// Runs one configuration and writes trace.csv and summary.json into dir.
inline CellOutput run_cell(const RunConfig& cfg, const std::filesystem::path& dir, int jobs) {
    // Config problems surface before any output is produced.
    const PreparedRun prep = prepare_run(cfg);
    const auto traces = run(cfg, prep, jobs);
    CellOutput out{config_digest(cfg), aggregate(traces), {}, prep.env.regime};
    out.fits = default_fits(out.summary);

    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_trace_csv(csv, out.digest, traces);
    write_text(dir / "trace.csv", csv.str());
    nlohmann::json summary = summary_to_json(out.digest, out.summary, out.fits);
    summary["algorithm"] = cfg.algorithm.name;
    summary["T"] = cfg.T;
    summary["replications"] = cfg.replications;
    summary["regime"] = out.regime;
    if (prep.exploration) summary["lambda"] = prep.exploration->lambda;
    if (cfg.diagnostics.bound_checks) {
        long checks = 0, violations = 0;
        for (const auto& tr : traces) {
            checks += tr.bound_checks;
            violations += tr.bound_violations;
        }
        summary["bound_checks"] = {{"rounds", checks}, {"violations", violations}};
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return out;
}

inline int cmd_run(const Options& opt) {
    return guarded("run", [&] {
        RunConfig cfg = run_config_from_json(load_config(opt.config));
        if (opt.seed) cfg.base_seed = *opt.seed;
        const CellOutput out = run_cell(cfg, opt.out, opt.jobs);
        if (!opt.quiet)
            std::cout << "run " << out.digest << ": T=" << cfg.T << " mean cum_regret " << out.summary.mean.back()
                      << " (stderr " << out.summary.stderr_.back() << ")\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepCell {
    long horizon = 0;
    std::optional<nlohmann::json> beta;
    AlgorithmSpec algorithm;
    RunConfig config;
};

inline std::vector<SweepCell> expand_sweep(const nlohmann::json& j) {
    std::vector<long> horizons;
    if (j.contains("horizons")) {
        const auto& h = j["horizons"];
        if (!h.is_array()) throw ConfigError("field 'horizons' must be an array");
        for (const auto& t : h) {
            if (!t.is_number_integer() || t.get<long long>() < 1)
                throw ConfigError("field 'horizons' entries must be positive integers");
            horizons.push_back(t.get<long>());
        }
    } else {
        horizons.push_back(detail::require_positive_long(j, "T"));
    }
    std::vector<std::optional<nlohmann::json>> betas;
    if (j.contains("betas")) {
        if (!j["betas"].is_array()) throw ConfigError("field 'betas' must be an array");
        for (const auto& b : j["betas"]) betas.emplace_back(b);
    } else {
        betas.emplace_back(std::nullopt);
    }
    std::vector<nlohmann::json> algorithms;
    if (j.contains("algorithms")) {
        if (!j["algorithms"].is_array()) throw ConfigError("field 'algorithms' must be an array");
        for (const auto& a : j["algorithms"]) algorithms.push_back(a);
    } else {
        algorithms.push_back(j.value("algorithm", nlohmann::json("lc-tsallis-inf")));
    }
    if (horizons.empty() || betas.empty() || algorithms.empty()) throw ConfigError("sweep grid is empty");

    std::vector<SweepCell> cells;
    for (const auto& beta : betas)
        for (const auto& alg : algorithms)
            for (long T : horizons) {
                nlohmann::json c = j;
                c.erase("horizons");
                c.erase("betas");
                c.erase("algorithms");
                c["T"] = T;
                c["algorithm"] = alg;
                if (beta) c["instance"]["beta"] = *beta;
                SweepCell cell;
                cell.horizon = T;
                cell.beta = beta;
                cell.config = run_config_from_json(c);
                cell.algorithm = cell.config.algorithm;
                cells.push_back(std::move(cell));
            }
    return cells;
}

inline int cmd_sweep(const Options& opt) {
    return guarded("sweep", [&] {
        const nlohmann::json j = load_config(opt.config);
        std::vector<SweepCell> cells = expand_sweep(j);
        for (auto& c : cells)
            if (opt.seed) c.config.base_seed = *opt.seed;
        // Validate every cell up front so a config error cannot leave a partial sweep.
        for (const auto& c : cells) (void)prepare_run(c.config);

        const std::filesystem::path root = opt.out;
        std::vector<CellOutput> outputs(cells.size());
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) {
                try {
                    outputs[i] = run_cell(cells[i].config, root / ("cell_" + std::to_string(i)), 1);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = cells.size();
                }
            }
        };
        const int workers = std::clamp(opt.jobs, 1, static_cast<int>(cells.size()));
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);

        // Group cells sharing instance and algorithm; fit across horizons when
        // there are enough of them, otherwise on the longest cell's per-round curve.
        nlohmann::json report{{"cells", nlohmann::json::array()}, {"groups", nlohmann::json::array()}};
        std::vector<std::string> keys;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& c = cells[i];
            const auto& o = outputs[i];
            nlohmann::json beta = c.beta ? *c.beta : nlohmann::json(nullptr);
            report["cells"].push_back({{"cell", i},
                                       {"dir", "cell_" + std::to_string(i)},
                                       {"config_digest", o.digest},
                                       {"T", c.horizon},
                                       {"beta", beta},
                                       {"algorithm", c.algorithm.name},
                                       {"final_mean", o.summary.mean.back()},
                                       {"final_stderr", o.summary.stderr_.back()},
                                       {"certificate", o.regime.value("certificate", nlohmann::json(nullptr))},
                                       {"regime", o.regime}});
            const std::string key = beta.dump() + "|" + algorithm_to_json(c.algorithm).dump();
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
        }
        for (const auto& key : keys) {
            std::vector<long> rounds;
            std::vector<double> means;
            std::size_t longest = 0;
            nlohmann::json beta, algorithm;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const auto& c = cells[i];
                nlohmann::json b = c.beta ? *c.beta : nlohmann::json(nullptr);
                if (b.dump() + "|" + algorithm_to_json(c.algorithm).dump() != key) continue;
                beta = b;
                algorithm = c.algorithm.name;
                rounds.push_back(c.horizon);
                means.push_back(outputs[i].summary.mean.back());
                if (rounds.size() == 1 || c.horizon > cells[longest].horizon) longest = i;
            }
            nlohmann::json fits = nlohmann::json::array();
            std::string source = "horizons";
            try {
                for (const auto& m : {ScalingModel::log(), ScalingModel::sqrt()})
                    fits.push_back(fit_to_json(fit_scaling(rounds, means, m)));
            } catch (const InsufficientSpan&) {
                fits = nlohmann::json::array();
                source = "per_round";
                for (const auto& f : outputs[longest].fits) fits.push_back(fit_to_json(f));
            }
            report["groups"].push_back({{"beta", beta},
                                        {"algorithm", algorithm},
                                        {"horizons", rounds},
                                        {"final_means", means},
                                        {"fit_source", source},
                                        {"fits", fits}});
        }
        std::filesystem::create_directories(root);
        write_text(root / "sweep_report.json", report.dump(2) + "\n");
        if (!opt.quiet) std::cout << "sweep: " << cells.size() << " cells written under " << root.string() << '\n';
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// design / transform / solver-selftest / report

inline int cmd_design(const Options& opt) {
    return guarded("design", [&] {
        const nlohmann::json j = load_config(opt.config);
        const nlohmann::json& inst = j.contains("instance") ? j["instance"] : j;
        const long T = j.value("T", 1L);
        const double eps = j.value("design_eps", kDefaultDesignEps);
        const Environment env = environment_from_json(inst, T);
        const ExplorationPolicy e = build_exploration_policy(env.model, eps);
        nlohmann::json weights = nlohmann::json::array();
        for (int x = 0; x < e.table.rows(); ++x) weights.push_back(vector_to_json(e.table.row(x).transpose()));
        const nlohmann::json out{{"lambda", e.lambda},
                                 {"max_leverage", e.max_leverage},
                                 {"span_dim", e.span_dim},
                                 {"kiefer_wolfowitz_ratio", e.max_leverage / static_cast<double>(e.span_dim)},
                                 {"design_eps", eps},
                                 {"weights", weights}};
        std::filesystem::create_directories(opt.out);
        write_text(std::filesystem::path(opt.out) / "design.json", out.dump(2) + "\n");
        if (!opt.quiet)
            std::cout << "design: lambda " << e.lambda << ", max leverage " << e.max_leverage << " (span " << e.span_dim
                      << ")\n";
        return kExitOk;
    });
}

inline int cmd_transform(const Options& opt) {
    return guarded("transform", [&] {
        const nlohmann::json j = load_config(opt.config);
        nlohmann::json converted;
        nlohmann::json certificate;
        if (j.value("kind", std::string()) == "arm-independent" || j.contains("phi_tilde")) {
            const IndepInstance indep = indep_from_json(j);
            const DepInstance dep = indep_to_dep(indep);
            const auto mismatches = loss_equality_certificate(indep, dep);
            converted = instance_to_json(dep.model);
            nlohmann::json thetas = nlohmann::json::array();
            for (const Vector& th : dep.params.thetas) thetas.push_back(vector_to_json(th));
            converted["thetas"] = thetas;
            converted["kind"] = "arm-dependent";
            certificate = {{"direction", "indep_to_dep"}, {"violations", mismatches.size()}};
        } else {
            const FiniteContextModel m = instance_from_json(j);
            ParameterSet params;
            params.loss_margin = m.loss_margin();
            for (const auto& th : detail::require(j, "thetas")) params.thetas.push_back(vector_from_json(th, "thetas"));
            const IndepInstance indep = dep_to_indep(m, params);
            const auto mismatches = loss_equality_certificate(indep, DepInstance{m, params});
            converted = indep_to_json(indep);
            certificate = {{"direction", "dep_to_indep"}, {"violations", mismatches.size()}};
        }
        converted["certificate"] = certificate;
        std::filesystem::create_directories(opt.out);
        write_text(std::filesystem::path(opt.out) / "transformed.json", converted.dump(2) + "\n");
        if (!opt.quiet)
            std::cout << "transform: " << certificate["direction"].get<std::string>() << ", "
                      << certificate["violations"].get<std::size_t>() << " loss mismatches\n";
        return certificate["violations"].get<std::size_t>() == 0 ? kExitOk : kExitRuntime;
    });
}

struct SelftestResult {
    int instances = 0;
    double worst_error = 0.0;
    int max_iterations = 0;
    int within_15 = 0;
};

/// solve_tsallis against the primal oracle on random instances with
/// K in [2, 32] and eta log-uniform in [1e-3, 10].
inline SelftestResult solver_selftest(int instances, std::uint64_t seed, double alpha = 0.5) {
    Rng rng(seed);
    SelftestResult r;
    r.instances = instances;
    for (int i = 0; i < instances; ++i) {
        const int K = 2 + std::min(30, static_cast<int>(uniform01(rng) * 31));
        const double eta = std::pow(10.0, -3.0 + 4.0 * uniform01(rng));
        const double scale = std::pow(10.0, -1.0 + 3.0 * uniform01(rng));
        Vector L(K);
        for (int a = 0; a < K; ++a) L(a) = scale * uniform01(rng);
        const TsallisSolution sol = solve_tsallis(L, eta, TsallisConfig(alpha));
        const auto ref = testing::tsallis_primal_oracle(L, eta, alpha);
        r.worst_error = std::max(r.worst_error, (sol.q - ref.q).lpNorm<Eigen::Infinity>());
        r.max_iterations = std::max(r.max_iterations, sol.iterations);
        if (sol.iterations <= 15) ++r.within_15;
    }
    return r;
}

inline int cmd_solver_selftest(const Options& opt, int instances) {
    return guarded("solver-selftest", [&] {
        if (instances < 1) throw ConfigError("--instances must be positive");
        const SelftestResult r = solver_selftest(instances, opt.seed.value_or(1));
        const bool ok = r.worst_error <= 1e-6 && r.within_15 >= static_cast<int>(std::ceil(0.99 * instances));
        if (!opt.quiet)
            std::cout << "solver-selftest: " << r.instances << " instances, worst error " << r.worst_error
                      << ", max Newton iterations " << r.max_iterations << ", within 15: " << r.within_15 << '\n';
        return ok ? kExitOk : kExitRuntime;
    });
}

inline int cmd_report(const Options& opt, const std::vector<std::string>& summaries) {
    return guarded("report", [&] {
        if (summaries.empty()) throw ConfigError("report needs at least one summary file");
        std::vector<ReportSeries> series;
        for (const auto& path : summaries) {
            if (!std::filesystem::exists(path)) throw ConfigError("missing summary '" + path + "'");
            const nlohmann::json j = read_json_file(path);
            ReportSeries s;
            s.label = std::filesystem::path(path).parent_path().filename().string();
            if (s.label.empty()) s.label = std::filesystem::path(path).stem().string();
            s.summary = summary_from_json(j);
            if (j.contains("fits"))
                for (const auto& f : j["fits"])
                    s.fits.push_back({f.at("model").get<std::string>(), f.at("coefficient").get<double>(),
                                      f.value("intercept", 0.0), f.at("r2").get<double>()});
            series.push_back(std::move(s));
        }
        const std::filesystem::path out = opt.out;
        std::filesystem::create_directories(out);
        write_text(out / "regret_loglog.svg", render_svg(series, AxisScale::Log, AxisScale::Log));
        write_text(out / "regret_linlog.svg", render_svg(series, AxisScale::Log, AxisScale::Linear));
        write_text(out / "fits.md", fits_markdown(series));
        if (!opt.quiet) std::cout << "report: " << series.size() << " series written to " << out.string() << '\n';
        return kExitOk;
    });
}

}  // namespace lcb::cli
