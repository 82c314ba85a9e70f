// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Experiment orchestration: config and profile parsing, (pair, policy, trial)
 * cells run in parallel, CSV output, and the calibration and correlation
 * workflows behind the CLI.
 *
 * Output layout under the experiment's out directory:
 *   cells/<pair>_<trial>_<policy>.csv   one file per cell, finalized by rename
 *   raw.csv                             all cells, prefixed by pair,trial,l_ar
 *   summary.csv                         one row per (pair, policy)
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spectree/cost_model.hpp"
#include "spectree/lattice.hpp"
#include "spectree/verify_sim.hpp"

namespace spectree {

/// Device description: roofline parameters plus the simulated device's
/// response (sim_slope, sim_intercept, sim_noise) and fixed per-cycle costs.
struct HardwareProfile {
    std::string name;
    CostModelParams params;
    double sim_slope = 1.0;
    double sim_intercept = 0.0;
    double sim_noise = 0.0;
    double t_draft = 0.0;
    double t_aux = 0.0;

    SimulatedHardware hardware(std::uint64_t seed) const;
};

HardwareProfile parse_profile(std::istream& in, std::string name);
HardwareProfile load_profile(const std::filesystem::path& path);

struct ExperimentConfig {
    std::vector<SyntheticPairConfig> pairs;
    TargetMode target_mode = TargetMode::greedy_aligned;
    std::vector<Policy> policies;
    std::vector<std::size_t> fixed_grid{32, 64, 128, 256, 512, 1024};
    HardwareProfile profile;
    std::size_t run_length = 256;
    std::size_t trials = 3;
    std::size_t prompt_len = 64;
    std::size_t top_k = 8;
    std::size_t n_max = 1024;
    double temperature = 0.0;
    EstimatorVariant variant = EstimatorVariant::static_calib;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    std::size_t workers = 1;

    void validate() const;
};

/**
 * Flat "key = value" text. Repeated `alignment` lines define one pair each
 * (sharing gamma, vocab, concentration); repeated `policy` lines list
 * policies, where `policy = fixed-grid` expands to fixed-N over `fixed_grid`.
 * A relative `profile` path is resolved against `base_dir`.
 */
ExperimentConfig parse_experiment_config(std::istream& in, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Profile-driven latency trace over a grid of (s, c) with the device's noise.
std::vector<TraceRow> synthesize_trace(const HardwareProfile& profile, std::uint64_t seed);

/// Estimator for `variant`, calibrated on synthesize_trace(profile, seed).
LatencyEstimator make_estimator(const HardwareProfile& profile, EstimatorVariant variant, std::uint64_t seed);

/// One autoregressive step on the noise-free device at context `context_len`.
double ar_step_latency(const HardwareProfile& profile, std::size_t context_len);

struct CellKey {
    std::size_t pair = 0;
    std::size_t trial = 0;
    std::size_t policy = 0;
};

struct TrialMetrics {
    double speedup = 0.0;
    /// Committed tokens per cycle.
    double tau = 0.0;
    /// Mean draft nodes verified per cycle.
    double mean_n = 0.0;
};

TrialMetrics trial_metrics(std::span<const CycleRecord> records);

/// Everything needed to run one cell outside the experiment driver.
DecodeConfig cell_decode_config(const ExperimentConfig& cfg, const CellKey& key);
SyntheticPair cell_pair(const ExperimentConfig& cfg, std::size_t pair_index);

struct SummaryRow {
    std::size_t pair = 0;
    std::string policy;
    std::size_t trials = 0;
    double mean_speedup = 0.0;
    double se_speedup = 0.0;
    double mean_tau = 0.0;
    double se_tau = 0.0;
    double mean_n = 0.0;
    double se_n = 0.0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct ExperimentResult {
    std::filesystem::path raw_csv;
    std::filesystem::path summary_csv;
    std::vector<SummaryRow> summary;
    /// "cell: message" for each cell that threw; its rows are omitted.
    std::vector<std::string> failures;
};

/// Validates config and output directory, runs every cell (up to `workers`
/// at a time), then writes raw.csv and summary.csv in cell order so output
/// does not depend on scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Recomputes the summary from raw.csv using cumulative columns only.
std::vector<SummaryRow> summarize_raw_csv(const std::filesystem::path& raw_csv);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& summary_csv);

/// Per-cell CSV: cycle,policy,N,accepted_len,surrogate,t_draft,t_verify,t_aux,cum_tokens,cum_time.
void write_cycle_csv(std::ostream& out, const std::string& policy, std::span<const CycleRecord> records);

/// Fits a static calibration for `profile` on `trace`, writes a key = value
/// report to `report_path` (skipped when empty) and returns the fit.
CalibrationFit calibrate(const HardwareProfile& profile, const std::filesystem::path& trace,
                         const std::filesystem::path& report_path);

struct Correlation {
    std::size_t n = 0;
    double pearson = 0.0;
    double spearman = 0.0;
};

/// Correlation of columns `surrogate` and `accepted_len` of any cycle CSV.
Correlation correlate(const std::filesystem::path& cycle_csv);
Correlation correlate(std::span<const double> surrogate, std::span<const double> accepted_len);

/// Paired per-cycle accepted lengths for three topologies on identical
/// lattices: best-first at the beam's budget, beam(width, depth) and the
/// greedy chain. The committed stream follows the target, so every topology
/// sees the same contexts.
struct TopologyComparison {
    std::vector<double> best_first;
    std::vector<double> beam;
    std::vector<double> chain;
    std::vector<std::size_t> budgets;
};

TopologyComparison compare_topologies(const SyntheticPair& pair, std::size_t width, std::size_t depth,
                                      std::size_t top_k, std::size_t cycles, std::uint64_t prompt_seed,
                                      std::size_t prompt_len = 64);

/// Writes `text` to `path` through a sibling temporary and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace spectree
