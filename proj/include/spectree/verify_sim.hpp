// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Simulated target-side verification and the multi-cycle decoding loop.
 *
 * One cycle: query drafter marginals for the committed context, plan a tree
 * under the chosen policy, linearize it with an ancestor-only attention mask,
 * let the target "score" every node, accept the longest target-consistent
 * root chain plus the target's bonus token, and crop the cache to the
 * accepted path. Latencies come from a simulated device so planning and
 * measurement share one clock.
 */

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spectree/controller.hpp"
#include "spectree/cost_model.hpp"
#include "spectree/draft_tree.hpp"
#include "spectree/lattice.hpp"
#include "spectree/target_rule.hpp"

namespace spectree {

/// Flat tree input for one verification pass. Row i is tree node i in
/// expansion order (row 0 is the root/bonus token). Column j < prefix_len is
/// a committed-cache position; column prefix_len + k is tree node k.
struct LinearizedTree {
    std::vector<Token> tokens;
    /// Node depth; absolute position is prefix_len + depth.
    std::vector<int> position_ids;
    std::vector<NodeId> parents;
    std::size_t prefix_len = 0;

    std::size_t tree_len() const noexcept { return tokens.size(); }
    std::size_t columns() const noexcept { return prefix_len + tokens.size(); }
    /// True iff column j is in the committed prefix or is an ancestor-or-self
    /// of node `row`.
    bool attends(std::size_t row, std::size_t col) const;

    /// tree_len x tree_len ancestor-or-self block, row-major. The prefix
    /// columns are all true and not stored.
    std::vector<std::uint8_t> tree_mask;
};

LinearizedTree linearize(const DraftTree& tree, std::size_t prefix_len);

/// Tokens committed so far plus their rolling fingerprint.
class SimCache {
  public:
    SimCache() = default;
    explicit SimCache(std::vector<Token> tokens);

    void append(Token t);
    std::span<const Token> tokens() const noexcept { return tokens_; }
    std::size_t size() const noexcept { return tokens_.size(); }
    ContextHash hash() const noexcept { return hash_; }

    friend bool operator==(const SimCache& a, const SimCache& b) { return a.tokens_ == b.tokens_; }

  private:
    std::vector<Token> tokens_;
    ContextHash hash_;
};

/// Deterministic pseudo-random prompt of `length` >= 1 tokens.
SimCache make_prompt(std::size_t length, std::size_t vocab_size, std::uint64_t seed);

struct AcceptanceRecord {
    /// Node ids from the root down; always starts with 0.
    std::vector<NodeId> accepted_path;
    /// Draft tokens along accepted_path (root excluded).
    std::vector<Token> accepted_tokens;
    Token bonus_token = kNoToken;
    /// Accepted drafts plus the bonus token, so >= 1.
    std::size_t accepted_len = 0;
};

/// Walks from the root, descending into the child that matches the target's
/// choice at each accepted node, and stops at the first miss. The target sees
/// `cache` followed by each node's path. Temperature 0 means greedy.
AcceptanceRecord verify_tree(const LinearizedTree& lin, const DraftTree& tree, const TargetRule& target,
                             double temperature, const SimCache& cache);

/// Cache after the cycle: old tokens, accepted drafts, then the bonus token.
/// Throws std::invalid_argument if `rec` is not a root chain of `tree`.
SimCache commit(const SimCache& cache, const AcceptanceRecord& rec, const DraftTree& tree);

/// Plain autoregressive decoding of `n_tokens` tokens, the reference output.
SimCache ar_decode(const TargetRule& target, SimCache cache, std::size_t n_tokens, double temperature);

/// Stand-in device: observed latency = (slope * roofline + intercept) times a
/// deterministic multiplicative jitter of relative standard deviation `noise`.
struct SimulatedHardware {
    CostModelParams params;
    double slope = 1.0;
    double intercept = 0.0;
    double noise = 0.0;
    std::uint64_t seed = 0;

    double noise_free_latency(const LatencyQuery& q) const;
    /// `nonce` decorrelates repeated measurements of the same query.
    double verify_latency(const LatencyQuery& q, std::uint64_t nonce) const;
};

struct Policy {
    enum class Kind { adaptive, fixed, greedy_chain, beam };
    Kind kind = Kind::adaptive;
    std::size_t n = 0;
    std::size_t width = 0;
    std::size_t depth = 0;

    static Policy adaptive() { return {}; }
    static Policy fixed(std::size_t n) { return {Kind::fixed, n, 0, 0}; }
    static Policy greedy_chain() { return {Kind::greedy_chain, 0, 0, 0}; }
    static Policy beam(std::size_t w, std::size_t d) { return {Kind::beam, 0, w, d}; }

    /// "adaptive", "fixed-64", "greedy-chain", "beam-4x15".
    std::string name() const;
    /// Accepts name() forms plus "fixed:64" and "beam:4:15".
    static Policy parse(const std::string& text);

    friend bool operator==(const Policy&, const Policy&) = default;
};

struct CycleRecord {
    std::size_t cycle = 0;
    std::size_t tree_size = 0;
    std::size_t accepted_len = 0;
    double surrogate = 0.0;
    double t_draft = 0.0;
    double t_verify = 0.0;
    double t_aux = 0.0;
    double l_ar = 0.0;

    double cycle_time() const noexcept { return t_draft + t_verify + t_aux; }
};

struct DecodeConfig {
    /// n_max, variant and latencies (t_draft, t_aux, l_ar) for planning and
    /// for the simulated clock.
    ControllerConfig controller;
    std::size_t run_length = 256;
    std::size_t prompt_len = 64;
    std::size_t top_k = 8;
    double temperature = 0.0;
    std::uint64_t prompt_seed = 0;
    SimulatedHardware hardware;
    /// Required by the adaptive policy.
    std::optional<LatencyEstimator> estimator;
};

struct DecodeResult {
    std::vector<CycleRecord> records;
    SimCache cache;
    std::size_t prompt_len = 0;

    std::span<const Token> generated() const { return cache.tokens().subspan(prompt_len); }
};

/// Runs cycles until at least `run_length` tokens are committed.
DecodeResult decode(const SyntheticPair& pair, const DecodeConfig& cfg, const Policy& policy);

/// Plans one tree for `lattice` under `policy` (adaptive uses `controller`).
DraftTree plan_tree(const CandidateLattice& lattice, const Policy& policy, BudgetController* controller,
                    std::int64_t context_len);

/// Committed tokens times L_AR over total simulated time.
double realized_speedup(std::span<const CycleRecord> records);

} // namespace spectree
