// lcb_lab: experiment driver for the linear contextual bandit library.

#include "lcb/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
    lcb::cli::Options opt;
    std::uint64_t seed = 0;
    CLI::Option* seed_flag = nullptr;

    lcb::cli::Options resolved() const {
        lcb::cli::Options o = opt;
        if (seed_flag && seed_flag->count() > 0) o.seed = seed;
        return o;
    }
};

void add_common(CLI::App* sub, CommonFlags& f, bool needs_config) {
    auto* config = sub->add_option("--config", f.opt.config, "JSON config path");
    if (needs_config) config->required();
    sub->add_option("--out", f.opt.out, "output directory")->capture_default_str();
    sub->add_option("--jobs", f.opt.jobs, "concurrent replications or cells (default: BANDIT_LAB_JOBS or 1)")
        ->check(CLI::PositiveNumber);
    f.seed_flag = sub->add_option("--seed", f.seed, "override base_seed");
    sub->add_flag("--quiet", f.opt.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear contextual bandit lab: best-of-both-worlds FTRL experiments"};
    app.require_subcommand(1, 1);

    CommonFlags run_f, sweep_f, design_f, transform_f, selftest_f, report_f;
    for (auto* f : {&run_f, &sweep_f, &design_f, &transform_f, &selftest_f, &report_f})
        f->opt.jobs = lcb::cli::default_jobs();

    auto* run = app.add_subcommand("run", "run one configuration, write trace.csv and summary.json");
    add_common(run, run_f, true);

    auto* sweep = app.add_subcommand("sweep", "cartesian sweep over horizons, betas and algorithms");
    add_common(sweep, sweep_f, true);

    auto* design = app.add_subcommand("design", "G-optimal exploration design for an instance");
    add_common(design, design_f, true);

    auto* transform = app.add_subcommand("transform", "convert between arm-independent and arm-dependent features");
    add_common(transform, transform_f, true);

    int instances = 500;
    auto* selftest = app.add_subcommand("solver-selftest", "check the Tsallis solver against the primal oracle");
    add_common(selftest, selftest_f, false);
    selftest->add_option("--instances", instances, "number of random instances")->capture_default_str();

    std::vector<std::string> summaries;
    auto* report = app.add_subcommand("report", "SVG charts and a fits table from summary.json files");
    add_common(report, report_f, false);
    report->add_option("summaries", summaries, "summary.json paths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lcb::cli::kExitConfig;
    }

    if (run->parsed()) return lcb::cli::cmd_run(run_f.resolved());
    if (sweep->parsed()) return lcb::cli::cmd_sweep(sweep_f.resolved());
    if (design->parsed()) return lcb::cli::cmd_design(design_f.resolved());
    if (transform->parsed()) return lcb::cli::cmd_transform(transform_f.resolved());
    if (selftest->parsed()) return lcb::cli::cmd_solver_selftest(selftest_f.resolved(), instances);
    if (report->parsed()) return lcb::cli::cmd_report(report_f.resolved(), summaries);
    return lcb::cli::kExitConfig;
}
