// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: run, calibrate, correlate, oracle-check, synth-trace.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spectree/harness.hpp"
#include "spectree/oracle_check.hpp"

namespace {

using namespace spectree;

int cmd_run(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> workers) {
    ExperimentConfig cfg = load_experiment_config(config);
    if (!out.empty()) {
        cfg.out_dir = out;
    }
    if (seed) {
        cfg.seed = *seed;
    }
    if (workers) {
        cfg.workers = *workers;
    }
    ExperimentResult res = run_experiment(cfg);
    std::printf("%-16s %5s %10s %10s %10s\n", "policy", "pair", "speedup", "tau", "N");
    for (const SummaryRow& r : res.summary) {
        std::printf("%-16s %5zu %10.4f %10.4f %10.2f\n", r.policy.c_str(), r.pair, r.mean_speedup, r.mean_tau,
                    r.mean_n);
    }
    std::printf("raw: %s\nsummary: %s\n", res.raw_csv.c_str(), res.summary_csv.c_str());
    if (!res.failures.empty()) {
        std::fprintf(stderr, "error: %zu cell(s) failed; first: %s\n", res.failures.size(),
                     res.failures.front().c_str());
        return 1;
    }
    return 0;
}

int cmd_calibrate(const std::string& profile_path, const std::string& trace, const std::string& out) {
    HardwareProfile profile = load_profile(profile_path);
    CalibrationFit fit = calibrate(profile, trace, out);
    std::printf("slope = %.9g\nintercept = %.9g\nrmse_before = %.6g\nrmse_after = %.6g\nreduction = %.2f%%\n",
                fit.slope, fit.intercept, fit.rmse_before, fit.rmse_after, 100.0 * fit.rmse_reduction());
    return 0;
}

int cmd_correlate(const std::string& csv) {
    Correlation c = correlate(csv);
    std::printf("cycles = %zu\npearson = %.6f\nspearman = %.6f\n", c.n, c.pearson, c.spearman);
    return 0;
}

int cmd_oracle_check(std::uint64_t seed) {
    bool all = true;
    for (const CheckResult& r : run_oracle_bridge(seed)) {
        std::printf("%s %-26s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all = all && r.passed;
    }
    if (!all) {
        std::fprintf(stderr, "error: oracle bridge failed\n");
    }
    return all ? 0 : 1;
}

int cmd_synth_trace(const std::string& profile_path, const std::string& out, std::uint64_t seed) {
    HardwareProfile profile = load_profile(profile_path);
    std::vector<TraceRow> rows = synthesize_trace(profile, seed);
    std::ostringstream text;
    write_latency_trace(text, rows);
    if (out.empty()) {
        std::cout << text.str();
    } else {
        write_file_atomic(out, text.str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Draft-tree planning and speculative decoding simulator"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string trace;
    std::string csv;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    auto* run = app.add_subcommand("run", "Run an experiment config and write CSVs");
    run->add_option("--config", config, "Experiment config file")->required();
    run->add_option("--out", out, "Output directory (overrides config)");
    auto* run_seed = run->add_option("--seed", seed, "Base seed (overrides config)");
    auto* run_workers = run->add_option("--workers", workers, "Cells run concurrently")->check(CLI::PositiveNumber);

    auto* cal = app.add_subcommand("calibrate", "Fit a linear correction of the roofline on a latency trace");
    cal->add_option("--config,--profile", config, "Hardware profile")->required();
    cal->add_option("--trace", trace, "CSV of s,c,observed_seconds")->required();
    cal->add_option("--out", out, "Report file");

    auto* cor = app.add_subcommand("correlate", "Correlate surrogate with accepted length in a cycle CSV");
    cor->add_option("csv", csv, "Cycle CSV (raw.csv or a cell file)")->required();

    auto* chk = app.add_subcommand("oracle-check", "Run the oracle bridge checks and the overhead timing");
    chk->add_option("--seed", seed, "Seed for the fixtures");

    auto* syn = app.add_subcommand("synth-trace", "Write a simulated latency trace for a profile");
    syn->add_option("--config,--profile", config, "Hardware profile")->required();
    syn->add_option("--out", out, "Trace file (stdout if omitted)");
    syn->add_option("--seed", seed, "Noise seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run) {
            return cmd_run(config, out, run_seed->count() ? std::optional(seed) : std::nullopt,
                           run_workers->count() ? std::optional(workers) : std::nullopt);
        }
        if (*cal) {
            return cmd_calibrate(config, trace, out);
        }
        if (*cor) {
            return cmd_correlate(csv);
        }
        if (*chk) {
            return cmd_oracle_check(seed);
        }
        if (*syn) {
            return cmd_synth_trace(config, out, seed);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
