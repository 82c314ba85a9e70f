// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference against the OpenMP kernels, plus the cell-parallel
// experiment runner at several worker counts.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <sstream>

#include "spectree/harness.hpp"
#include "spectree/oracle.hpp"
#include "spectree/oracle_check.hpp"

namespace {

using namespace spectree;

struct Fixture {
    MarginalBlock block;
    DraftTree tree;
};

Fixture make_fixture() {
    RandomStream rng(1);
    MarginalBlock block = random_block(rng, 4, 24);
    DraftTree tree = best_first_expand(top_k_truncate(block, 6), 120);
    return {block, tree};
}

void BM_ExactCommitSerial(benchmark::State& state) {
    Fixture f = make_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_expected_commit_serial(f.tree, f.block));
    }
}
BENCHMARK(BM_ExactCommitSerial)->Unit(benchmark::kMillisecond);

void BM_ExactCommitParallel(benchmark::State& state) {
    Fixture f = make_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_expected_commit(f.tree, f.block));
    }
}
BENCHMARK(BM_ExactCommitParallel)->Unit(benchmark::kMillisecond);

void BM_MonteCarloSerial(benchmark::State& state) {
    Fixture f = make_fixture();
    RandomStream rng(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(monte_carlo_commit_serial(f.tree, f.block, 200000, rng));
    }
}
BENCHMARK(BM_MonteCarloSerial)->Unit(benchmark::kMillisecond);

void BM_MonteCarloParallel(benchmark::State& state) {
    Fixture f = make_fixture();
    RandomStream rng(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(monte_carlo_commit(f.tree, f.block, 200000, rng));
    }
}
BENCHMARK(BM_MonteCarloParallel)->Unit(benchmark::kMillisecond);

void BM_RunExperiment(benchmark::State& state) {
    std::istringstream in("profile = crossover.profile\nalignment = 0.8\npolicy = adaptive\n"
                          "policy = fixed-64\npolicy = beam-4x15\nrun_length = 256\ntrials = 4\n");
    ExperimentConfig cfg = parse_experiment_config(in, SPECTREE_DATA_DIR);
    cfg.workers = static_cast<std::size_t>(state.range(0));
    cfg.out_dir = std::filesystem::temp_directory_path() / "spectree_bench";
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_experiment(cfg).summary.size());
    }
    std::filesystem::remove_all(cfg.out_dir);
}
BENCHMARK(BM_RunExperiment)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
