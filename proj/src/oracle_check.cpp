// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/oracle_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "spectree/controller.hpp"
#include "spectree/oracle.hpp"
#include "spectree/verify_sim.hpp"

namespace spectree {

namespace {

std::size_t uniform_index(RandomStream& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

std::size_t tree_capacity(std::size_t gamma, std::size_t vocab) {
    std::size_t total = 0;
    std::size_t level = 1;
    for (std::size_t d = 0; d < gamma; ++d) {
        level *= vocab;
        total += level;
    }
    return total;
}

std::string describe(std::size_t ok, std::size_t total, const std::string& extra = "") {
    std::ostringstream s;
    s << ok << "/" << total;
    if (!extra.empty()) {
        s << " " << extra;
    }
    return s.str();
}

CheckResult check_surrogate_exact(RandomStream& rng) {
    std::size_t ok = 0;
    const std::size_t total = 60;
    double worst = 0.0;
    bool serial_match = true;
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t gamma = 1 + uniform_index(rng, 4);
        std::size_t vocab = 2 + uniform_index(rng, gamma <= 2 ? 30 : 9);
        MarginalBlock block = random_block(rng, gamma, vocab);
        std::size_t cap = std::min<std::size_t>(40, static_cast<std::size_t>(std::pow(vocab, gamma)));
        DraftTree tree = random_tree(rng, block, 1 + uniform_index(rng, cap));
        double exact = exact_expected_commit(tree, block);
        double err = std::abs(exact - surrogate_of(tree));
        worst = std::max(worst, err);
        ok += err <= 1e-9 ? 1 : 0;
        serial_match = serial_match && exact == exact_expected_commit_serial(tree, block);
    }
    std::ostringstream extra;
    extra << "max_err=" << worst << (serial_match ? "" : " serial-mismatch");
    return {"surrogate_exact", ok == total && serial_match, describe(ok, total, extra.str())};
}

CheckResult check_monte_carlo_chain(RandomStream& rng) {
    const std::size_t total = 20;
    std::size_t within = 0;
    std::size_t samples = 0;
    try {
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t gamma = 2 + uniform_index(rng, 4);
            std::size_t vocab = 2 + uniform_index(rng, 6);
            MarginalBlock block = random_block(rng, gamma, vocab);
            std::size_t n = 1 + uniform_index(rng, std::min<std::size_t>(20, tree_capacity(gamma, vocab)));
            DraftTree tree = random_tree(rng, block, n);
            MonteCarloEstimate est = monte_carlo_commit(tree, block, 5000, rng);
            samples += est.samples;
            within += std::abs(est.mean - surrogate_of(tree)) <= 3.0 * est.std_err + 1e-12 ? 1 : 0;
        }
    } catch (const ContractViolation& e) {
        return {"monte_carlo_chain", false, e.what()};
    }
    return {"monte_carlo_chain", within * 10 >= total * 9,
            describe(within, total, "within 3 se, " + std::to_string(samples) + " samples, 0 violations")};
}

CheckResult check_best_first_optimal(RandomStream& rng) {
    const std::size_t total = 30;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t gamma = 1 + uniform_index(rng, 4);
        std::size_t k = 1 + uniform_index(rng, 3);
        MarginalBlock block = random_block(rng, gamma, k + 1 + uniform_index(rng, 3));
        CandidateLattice lattice = top_k_truncate(block, k);
        std::size_t n_max = std::min<std::size_t>(lattice.reachable_size(), 8);
        std::vector<OptimalTree> best = enumerate_optimal_trees(lattice, n_max);
        DraftTree full = best_first_expand(lattice, n_max);
        bool good = true;
        for (std::size_t n = 1; n <= n_max; ++n) {
            DraftTree bf = best_first_expand(lattice, n);
            good = good && std::abs(surrogate_of(bf) - best[n - 1].best_surrogate) <= 1e-12;
            // Nested: the size-n tree is the first n insertions of the full one.
            for (std::size_t j = 0; j < bf.size() && good; ++j) {
                good = bf.nodes()[j].parent == full.nodes()[j].parent && bf.nodes()[j].token == full.nodes()[j].token;
            }
        }
        ok += good ? 1 : 0;
    }
    return {"best_first_optimal", ok == total, describe(ok, total)};
}

CheckResult check_concavity(RandomStream& rng) {
    const std::size_t total = 200;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < total; ++i) {
        MarginalBlock block = random_block(rng, 2 + uniform_index(rng, 15), 4 + uniform_index(rng, 60));
        CandidateLattice lattice = top_k_truncate(block, 1 + uniform_index(rng, 4));
        try {
            (void)marginal_gains(best_first_expand(lattice, 1 + uniform_index(rng, 256)));
            ++ok;
        } catch (const ContractViolation&) {
        }
    }
    return {"concave_gains", ok == total, describe(ok, total)};
}

CheckResult check_first_decrease(RandomStream& rng) {
    const std::size_t total = 1000;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < total; ++i) {
        ConcaveConvexCase c = random_concave_convex(rng, 1 + uniform_index(rng, 200));
        std::vector<double> surrogates;
        double a = 1.0;
        for (double g : c.gains) {
            a += g;
            surrogates.push_back(a);
        }
        ok += replay_trace(c.gains, c.costs, c.l_ar).budget == scan_optimal_budget(surrogates, c.costs, c.l_ar) ? 1
                                                                                                             : 0;
    }
    return {"first_decrease_stop", ok == total, describe(ok, total)};
}

CheckResult check_roofline_toy() {
    CostModelParams p;
    p.layers = 1;
    p.hidden = 8;
    p.q_heads = 2;
    p.kv_heads = 1;
    p.head_dim = 4;
    p.ffn_hidden = 16;
    p.vocab = 32;
    p.bytes_per_element = 2;
    p.peak_flops = 1.0;
    p.bandwidth = 1.0;
    LatencyQuery q{2, 4};
    double f = flops(p, q);
    double b = bytes(p, q);
    ByteBreakdown parts = byte_breakdown(p, q);
    bool ok = f == 3712.0 && b == 3072.0 && parts.total() == b;
    std::ostringstream s;
    s << "flops=" << f << " bytes=" << b << " categories=" << parts.total();
    return {"roofline_toy", ok, s.str()};
}

CheckResult check_greedy_equivalence(RandomStream& rng) {
    SyntheticPairConfig pc;
    pc.gamma = 8;
    pc.vocab_size = 32;
    pc.alignment = 0.8;
    pc.seed = rng();
    SyntheticPair pair(pc);
    const std::vector<Policy> policies{Policy::adaptive(), Policy::fixed(24), Policy::greedy_chain(),
                                       Policy::beam(3, 5)};
    std::size_t ok = 0;
    std::size_t total = 0;
    for (std::size_t run = 0; run < 3; ++run) {
        DecodeConfig cfg;
        cfg.run_length = 96;
        cfg.prompt_len = 16;
        cfg.prompt_seed = rng();
        cfg.hardware.params = reference_model_params();
        cfg.controller.n_max = 64;
        cfg.controller.latencies = {1e-3, 2e-4, cfg.hardware.noise_free_latency({1, 16})};
        cfg.estimator.emplace(EstimatorVariant::static_calib, cfg.hardware.params, CalibrationFit{}, std::nullopt);
        for (const Policy& policy : policies) {
            DecodeResult res = decode(pair, cfg, policy);
            std::size_t produced = res.generated().size();
            SimCache ar = ar_decode(pair.target(), make_prompt(cfg.prompt_len, pc.vocab_size, cfg.prompt_seed),
                                    produced, 0.0);
            ok += ar == res.cache ? 1 : 0;
            ++total;
        }
    }
    return {"greedy_output_equivalence", ok == total, describe(ok, total)};
}

} // namespace

MarginalBlock random_block(RandomStream& rng, std::size_t gamma, std::size_t vocab_size) {
    std::vector<double> probs(gamma * vocab_size);
    for (std::size_t k = 0; k < gamma; ++k) {
        double* row = probs.data() + k * vocab_size;
        double sum = 0.0;
        for (std::size_t v = 0; v < vocab_size; ++v) {
            row[v] = -std::log(1.0 - uniform01(rng));
            sum += row[v];
        }
        for (std::size_t v = 0; v < vocab_size; ++v) {
            row[v] /= sum;
        }
    }
    return MarginalBlock(gamma, vocab_size, std::move(probs));
}

DraftTree random_tree(RandomStream& rng, const MarginalBlock& block, std::size_t n_draft) {
    const std::size_t vocab = block.vocab_size();
    DraftTree tree;
    std::vector<NodeId> open{0};
    for (std::size_t i = 0; i < n_draft; ++i) {
        if (open.empty()) {
            throw std::invalid_argument("random_tree: block cannot hold that many nodes");
        }
        std::size_t slot = uniform_index(rng, open.size());
        NodeId parent = open[slot];
        std::vector<Token> unused;
        for (std::size_t v = 0; v < vocab; ++v) {
            if (!tree.find_child(parent, static_cast<Token>(v))) {
                unused.push_back(static_cast<Token>(v));
            }
        }
        Token token = unused[uniform_index(rng, unused.size())];
        int depth = tree.node(parent).depth;
        NodeId child = tree.add_child(parent, token, block.prob(static_cast<std::size_t>(depth), token));
        if (unused.size() == 1) {
            open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
        }
        if (static_cast<std::size_t>(depth + 1) < block.gamma()) {
            open.push_back(child);
        }
    }
    return tree;
}

ConcaveConvexCase random_concave_convex(RandomStream& rng, std::size_t length) {
    ConcaveConvexCase c;
    c.l_ar = 0.01 + uniform01(rng);
    double g = 0.2 + 0.8 * uniform01(rng);
    const double a = 0.5 + 2.0 * uniform01(rng);
    const double b = 0.05 * uniform01(rng);
    const double q = 1e-3 * uniform01(rng) * uniform01(rng);
    for (std::size_t i = 0; i < length; ++i) {
        c.gains.push_back(g);
        g *= 0.5 + 0.5 * uniform01(rng);
        const double n = static_cast<double>(i + 1);
        c.costs.push_back(a + b * n + q * n * n);
    }
    return c;
}

CostModelParams reference_model_params() {
    CostModelParams p;
    p.layers = 36;
    p.hidden = 4096;
    p.q_heads = 32;
    p.kv_heads = 8;
    p.head_dim = 128;
    p.ffn_hidden = 12288;
    p.vocab = 151936;
    p.bytes_per_element = 2;
    p.peak_flops = 312e12;
    p.bandwidth = 2.0e12;
    return p;
}

OverheadReport measure_controller_overhead(std::uint64_t seed, std::size_t cycles, std::size_t n_max) {
    SyntheticPairConfig pc;
    pc.gamma = 16;
    pc.vocab_size = 64;
    pc.seed = seed;
    SyntheticPair pair(pc);
    ControllerConfig cfg;
    cfg.n_max = n_max;
    // A drafting cost far above verification keeps the estimate rising, so
    // every cycle expands the full budget.
    cfg.latencies = {1e3, 0.0, 1.0};
    LatencyEstimator model(EstimatorVariant::static_calib, reference_model_params(), CalibrationFit{}, std::nullopt);

    std::vector<CandidateLattice> lattices;
    for (std::size_t i = 0; i < cycles; ++i) {
        auto block = std::make_shared<const MarginalBlock>(pair.draft(ContextHash{}.extended(static_cast<Token>(i))));
        lattices.push_back(top_k_truncate(block, 8));
    }
    OverheadReport rep;
    rep.cycles = cycles;
    auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < cycles; ++i) {
        cfg.context_len = static_cast<std::int64_t>(64 + i);
        ControllerDecision d = run_cycle(lattices[i], cfg, model);
        rep.expanded_nodes += d.s_hat_trace.size();
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

std::vector<CheckResult> run_oracle_bridge(std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<CheckResult> out;
    out.push_back(check_surrogate_exact(rng));
    out.push_back(check_monte_carlo_chain(rng));
    out.push_back(check_best_first_optimal(rng));
    out.push_back(check_concavity(rng));
    out.push_back(check_first_decrease(rng));
    out.push_back(check_roofline_toy());
    out.push_back(check_greedy_equivalence(rng));
    OverheadReport rep = measure_controller_overhead(seed);
    std::ostringstream s;
    s << rep.micros_per_node() << " us/node over " << rep.expanded_nodes << " nodes";
    out.push_back({"controller_overhead", rep.micros_per_node() <= 10.0, s.str()});
    return out;
}

} // namespace spectree
