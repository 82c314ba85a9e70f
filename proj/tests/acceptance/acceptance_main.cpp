// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "spectree/controller.hpp"
#include "spectree/cost_model.hpp"
#include "spectree/draft_tree.hpp"
#include "spectree/harness.hpp"
#include "spectree/lattice.hpp"
#include "spectree/oracle.hpp"
#include "spectree/oracle_check.hpp"
#include "spectree/stats.hpp"
#include "spectree/verify_sim.hpp"

namespace fs = std::filesystem;
using namespace spectree;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::size_t pick(RandomStream& rng, std::size_t lo, std::size_t hi) {
    return lo + std::min(hi - lo, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1)));
}

std::size_t ipow(std::size_t b, std::size_t e) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < e; ++i) {
        r *= b;
    }
    return r;
}

std::size_t capacity(std::size_t gamma, std::size_t vocab) {
    std::size_t total = 0;
    for (std::size_t d = 1; d <= gamma; ++d) {
        total += ipow(vocab, d);
    }
    return total;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("spectree_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Outcome surrogate_exactness() {
    RandomStream rng(101);
    auto t0 = std::chrono::steady_clock::now();
    const std::size_t fixtures = 240;
    std::size_t ok = 0;
    double worst = 0.0;
    std::size_t largest = 0;
    for (std::size_t i = 0; i < fixtures; ++i) {
        std::size_t gamma = pick(rng, 1, 5);
        std::size_t v_max = 2;
        while (ipow(v_max + 1, gamma) <= kMaxEnumeratedOutcomes && v_max < 64) {
            ++v_max;
        }
        // Every 12th fixture sits at the enumeration ceiling.
        std::size_t vocab = i % 12 == 0 ? v_max : pick(rng, 2, std::min<std::size_t>(v_max, 12));
        MarginalBlock block = random_block(rng, gamma, vocab);
        DraftTree tree = random_tree(rng, block, pick(rng, 1, std::min<std::size_t>(64, capacity(gamma, vocab))));
        double err = std::abs(exact_expected_commit(tree, block) - surrogate_of(tree));
        worst = std::max(worst, err);
        largest = std::max(largest, ipow(vocab, gamma));
        ok += err <= 1e-9 ? 1 : 0;
    }
    double secs = seconds_since(t0);
    std::ostringstream s;
    s << ok << "/" << fixtures << " fixtures, max |err| " << worst << ", largest V^gamma " << largest << ", "
      << secs << " s";
    return {ok == fixtures && secs <= 30.0, s.str()};
}

Outcome covered_set_chain_structure() {
    RandomStream rng(202);
    const std::size_t fixtures = 200;
    const std::size_t per_fixture = 2000;
    std::size_t within = 0;
    std::size_t samples = 0;
    try {
        for (std::size_t i = 0; i < fixtures; ++i) {
            std::size_t gamma = pick(rng, 1, 6);
            std::size_t vocab = pick(rng, 2, 8);
            MarginalBlock block = random_block(rng, gamma, vocab);
            DraftTree tree =
                random_tree(rng, block, pick(rng, 1, std::min<std::size_t>(48, capacity(gamma, vocab))));
            MonteCarloEstimate est = monte_carlo_commit(tree, block, per_fixture, rng);
            samples += est.samples;
            within += std::abs(est.mean - surrogate_of(tree)) <= 3.0 * est.std_err + 1e-12 ? 1 : 0;
        }
    } catch (const ContractViolation& e) {
        return {false, std::string("chain violation: ") + e.what()};
    }
    std::ostringstream s;
    s << samples << " samples, 0 violations, " << within << "/" << fixtures << " fixtures within 3 se";
    return {samples >= 100000 && within * 100 >= fixtures * 99, s.str()};
}

Outcome best_first_optimality() {
    RandomStream rng(303);
    auto t0 = std::chrono::steady_clock::now();
    const std::size_t lattices = 200;
    std::size_t ok = 0;
    std::size_t checks = 0;
    for (std::size_t i = 0; i < lattices; ++i) {
        std::size_t gamma = pick(rng, 1, 4);
        std::size_t k = pick(rng, 1, 3);
        // A sprinkle of the largest shape keeps the n = 12 ceiling exercised.
        if (i % 20 == 0) {
            gamma = 4;
            k = 3;
        }
        MarginalBlock block = random_block(rng, gamma, k + pick(rng, 1, 4));
        CandidateLattice lattice = top_k_truncate(block, k);
        std::size_t n_max = std::min<std::size_t>(lattice.reachable_size(), kMaxEnumeratedNodes);
        std::vector<OptimalTree> best = enumerate_optimal_trees(lattice, n_max);
        DraftTree full = best_first_expand(lattice, n_max);
        bool good = true;
        for (std::size_t n = 1; n <= n_max; ++n) {
            DraftTree bf = best_first_expand(lattice, n);
            good = good && std::abs(surrogate_of(bf) - best[n - 1].best_surrogate) <= 1e-12;
            for (std::size_t j = 0; j < bf.size() && good; ++j) {
                good = bf.nodes()[j].parent == full.nodes()[j].parent && bf.nodes()[j].token == full.nodes()[j].token;
            }
            ++checks;
        }
        ok += good ? 1 : 0;
    }
    double secs = seconds_since(t0);
    std::ostringstream s;
    s << ok << "/" << lattices << " lattices, " << checks << " budgets, nested, " << secs << " s";
    return {ok == lattices && secs <= 60.0, s.str()};
}

Outcome concavity() {
    RandomStream rng(404);
    const std::size_t expansions = 1000;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < expansions; ++i) {
        MarginalBlock block = random_block(rng, pick(rng, 1, 16), pick(rng, 2, 64));
        CandidateLattice lattice = top_k_truncate(block, pick(rng, 1, std::min<std::size_t>(8, block.vocab_size())));
        DraftTree tree = best_first_expand(lattice, pick(rng, 1, 1024));
        std::vector<double> gains;
        for (const TreeNode& node : tree.nodes().subspan(1)) {
            gains.push_back(node.path_score);
        }
        bool good = std::adjacent_find(gains.begin(), gains.end(), std::less<>()) == gains.end();
        ok += good ? 1 : 0;
    }
    std::ostringstream s;
    s << ok << "/" << expansions << " expansions with non-increasing gains";
    return {ok == expansions, s.str()};
}

Outcome controller_stopping() {
    RandomStream rng(505);
    const std::size_t cases = 1000;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        ConcaveConvexCase c = random_concave_convex(rng, pick(rng, 1, 400));
        std::vector<double> surrogates;
        double a = 1.0;
        for (double g : c.gains) {
            a += g;
            surrogates.push_back(a);
        }
        ok += replay_trace(c.gains, c.costs, c.l_ar).budget == scan_optimal_budget(surrogates, c.costs, c.l_ar);
    }
    std::ostringstream s;
    s << ok << "/" << cases << " first-decrease budgets equal the exhaustive argmax";
    return {ok == cases, s.str()};
}

Outcome roofline_fidelity() {
    CostModelParams toy;
    toy.layers = 1;
    toy.hidden = 8;
    toy.q_heads = 2;
    toy.kv_heads = 1;
    toy.head_dim = 4;
    toy.ffn_hidden = 16;
    toy.vocab = 32;
    toy.bytes_per_element = 2;
    toy.peak_flops = 1.0;
    toy.bandwidth = 1.0;
    // 512 + 256 + 384 + 1536 + 1024 FLOPs; 2 * (512 + 80 + 944) bytes.
    bool toy_ok = flops(toy, {2, 4}) == 3712.0 && bytes(toy, {2, 4}) == 3072.0;

    std::size_t sums = 0;
    std::size_t sum_ok = 0;
    for (const CostModelParams& p : {toy, reference_model_params()}) {
        for (std::int64_t s = 1; s <= 2048; s = s * 3 / 2 + 1) {
            for (std::int64_t c : {0, 7, 512, 8192}) {
                ++sums;
                sum_ok += byte_breakdown(p, {s, c}).total() == bytes(p, {s, c});
            }
        }
    }

    std::size_t shape_ok = 0;
    std::size_t shapes = 0;
    std::vector<CostModelParams> devices{reference_model_params()};
    for (const char* name : {"memory_bound", "compute_bound"}) {
        devices.push_back(load_profile(fs::path(SPECTREE_DATA_DIR) / (std::string(name) + ".profile")).params);
    }
    for (const CostModelParams& p : devices) {
        for (std::int64_t c : {64, 1024, 8192}) {
            ++shapes;
            bool good = true;
            for (std::int64_t s = 1; s + 2 <= 2048; ++s) {
                double r0 = roofline_latency(p, {s, c});
                double r1 = roofline_latency(p, {s + 1, c});
                double r2 = roofline_latency(p, {s + 2, c});
                good = good && r1 >= r0 && r2 - 2.0 * r1 + r0 >= -1e-12 * r1;
            }
            shape_ok += good;
        }
    }
    std::ostringstream s;
    s << "toy " << (toy_ok ? "3712 FLOPs / 3072 bytes" : "MISMATCH") << ", category sums " << sum_ok << "/" << sums
      << ", monotone+convex " << shape_ok << "/" << shapes;
    return {toy_ok && sum_ok == sums && shape_ok == shapes, s.str()};
}

Outcome calibration() {
    CostModelParams p = reference_model_params();
    RandomStream rng(707);
    std::vector<LatencyPair> pairs;
    for (std::int64_t c : {128, 1024, 4096}) {
        for (std::int64_t s = 1; s <= 1024; s *= 2) {
            double pred = roofline_latency(p, {s, c});
            double eps = (2.0 * uniform01(rng) - 1.0) * std::sqrt(3.0);
            pairs.push_back({pred, 2.0 * pred * (1.0 + 0.02 * eps)});
        }
    }
    CalibrationFit fit = fit_static_calibration(pairs);

    // Constant observed/predicted ratio: the error must shrink by (1 - alpha)
    // every update.
    EmaBias bias{1.0, 0.1};
    const double ratio = 2.0;
    bool geometric = true;
    double err = bias.ratio_bias - ratio;
    for (int t = 0; t < 100; ++t) {
        bias = ema_update(bias, 1e-3, ratio * 1e-3);
        double next = bias.ratio_bias - ratio;
        geometric = geometric && std::abs(next - (1.0 - bias.alpha) * err) <= 1e-12 * std::abs(err) + 1e-15;
        err = next;
    }
    std::ostringstream s;
    s << "RMSE reduction " << 100.0 * fit.rmse_reduction() << "% (slope " << fit.slope << "), EMA factor "
      << (geometric ? "0.9 each step" : "NOT geometric");
    return {fit.rmse_reduction() >= 0.80 && geometric, s.str()};
}

Outcome greedy_preservation() {
    const std::vector<Policy> policies{Policy::adaptive(), Policy::fixed(48), Policy::greedy_chain(),
                                       Policy::beam(4, 15)};
    HardwareProfile profile = load_profile(fs::path(SPECTREE_DATA_DIR) / "crossover.profile");
    std::size_t runs = 0;
    std::size_t identical = 0;
    for (std::uint64_t seed = 0; seed < 52; ++seed) {
        SyntheticPairConfig pc;
        pc.alignment = std::vector<double>{0.2, 0.5, 0.8, 1.0}[seed % 4];
        pc.seed = seed;
        SyntheticPair pair(pc);
        DecodeConfig cfg;
        cfg.run_length = 128;
        cfg.prompt_len = 32;
        cfg.prompt_seed = 1000 + seed;
        cfg.hardware = profile.hardware(seed);
        cfg.controller.latencies = {profile.t_draft, profile.t_aux, ar_step_latency(profile, cfg.prompt_len)};
        cfg.estimator = make_estimator(profile, EstimatorVariant::static_calib, seed);
        const Policy& policy = policies[seed % policies.size()];
        DecodeResult res = decode(pair, cfg, policy);
        SimCache ar = ar_decode(pair.target(), make_prompt(cfg.prompt_len, pc.vocab_size, cfg.prompt_seed),
                                res.generated().size(), 0.0);
        ++runs;
        identical += ar == res.cache;
    }
    std::ostringstream s;
    s << identical << "/" << runs << " runs byte-identical to autoregressive decoding (4 policies)";
    return {runs >= 50 && identical == runs, s.str()};
}

Outcome topology_ordering() {
    SyntheticPairConfig pc;
    pc.alignment = 0.8;
    pc.seed = 909;
    SyntheticPair pair(pc);
    TopologyComparison cmp = compare_topologies(pair, 4, 15, 8, 600, 4242);
    double bf = mean(cmp.best_first);
    double bm = mean(cmp.beam);
    double ch = mean(cmp.chain);
    PairedTest t = paired_test(cmp.best_first, cmp.beam);
    std::ostringstream s;
    s << cmp.best_first.size() << " paired cycles at N=" << cmp.budgets.front() << ": best-first " << bf
      << " >= beam " << bm << " >= chain " << ch << ", paired t=" << t.t << " p=" << t.p_greater;
    return {cmp.best_first.size() >= 500 && bf >= bm && bm >= ch && t.p_greater < 0.05, s.str()};
}

Outcome adaptive_vs_fixed() {
    const fs::path data(SPECTREE_DATA_DIR);
    ExperimentConfig base = load_experiment_config(data / "sweep.cfg");
    base.policies.clear();
    base.policies.push_back(Policy::adaptive());
    for (std::size_t n : base.fixed_grid) {
        base.policies.push_back(Policy::fixed(n));
    }
    std::ostringstream s;
    bool all = true;
    const char* sep = "";
    for (const char* name : {"memory_bound", "compute_bound", "crossover"}) {
        ExperimentConfig cfg = base;
        cfg.profile = load_profile(data / (std::string(name) + ".profile"));
        cfg.out_dir = scratch_dir(name);
        ExperimentResult res = run_experiment(cfg);
        double adaptive = 0.0;
        double best_fixed = 0.0;
        std::string best_name;
        for (const SummaryRow& r : res.summary) {
            if (r.policy == "adaptive") {
                adaptive = r.mean_speedup;
            } else if (r.mean_speedup > best_fixed) {
                best_fixed = r.mean_speedup;
                best_name = r.policy;
            }
        }
        double ratio = adaptive / best_fixed;
        all = all && res.failures.empty() && ratio >= 0.95;
        s << sep << name << " " << ratio << "x of " << best_name;
        sep = "; ";
        fs::remove_all(cfg.out_dir);
    }
    return {all, s.str()};
}

Outcome surrogate_correlation() {
    const fs::path data(SPECTREE_DATA_DIR);
    ExperimentConfig cfg = load_experiment_config(data / "sweep.cfg");
    cfg.policies = {Policy::adaptive()};
    cfg.trials = 48;
    cfg.out_dir = scratch_dir("correlation");
    ExperimentResult res = run_experiment(cfg);
    Correlation c = correlate(res.raw_csv);
    fs::remove_all(cfg.out_dir);
    std::ostringstream s;
    s << c.n << " cycles at alignment " << cfg.pairs.front().alignment << ": Pearson " << c.pearson
      << ", Spearman " << c.spearman;
    return {res.failures.empty() && c.n >= 2000 && cfg.pairs.front().alignment >= 0.8 && c.pearson >= 0.6, s.str()};
}

Outcome controller_overhead() {
    OverheadReport rep = measure_controller_overhead(12);
    std::ostringstream s;
    s << rep.micros_per_node() << " us per expanded node over " << rep.expanded_nodes << " nodes";
    return {rep.micros_per_node() <= 10.0, s.str()};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "surrogate exactness", surrogate_exactness},
        {2, "covered set is a chain", covered_set_chain_structure},
        {3, "best-first optimality", best_first_optimality},
        {4, "concave marginal gains", concavity},
        {5, "first-decrease stopping", controller_stopping},
        {6, "roofline fidelity", roofline_fidelity},
        {7, "latency calibration", calibration},
        {8, "greedy output preservation", greedy_preservation},
        {9, "topology ordering", topology_ordering},
        {10, "adaptive vs fixed budgets", adaptive_vs_fixed},
        {11, "surrogate-acceptance correlation", surrogate_correlation},
        {12, "controller overhead", controller_overhead},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s [%2d] %s: %s\n", out.passed ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str());
        std::fflush(stdout);
        failed += out.passed ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
