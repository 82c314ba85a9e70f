// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/verify_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string_view>

namespace spectree {

namespace {

constexpr std::uint64_t kPromptSalt = 0x9b05688c2b3e6c1fULL;
constexpr std::uint64_t kNoiseSalt = 0x1f83d9abfb41bd6bULL;

std::size_t parse_size(std::string_view text, const std::string& whole) {
    std::size_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("bad policy '" + whole + "'");
    }
    return value;
}

} // namespace

bool LinearizedTree::attends(std::size_t row, std::size_t col) const {
    const std::size_t n = tree_len();
    if (row >= n || col >= columns()) {
        throw std::out_of_range("LinearizedTree::attends: index out of range");
    }
    if (col < prefix_len) {
        return true;
    }
    return tree_mask[row * n + (col - prefix_len)] != 0;
}

LinearizedTree linearize(const DraftTree& tree, std::size_t prefix_len) {
    LinearizedTree lin;
    const std::size_t n = tree.size();
    lin.prefix_len = prefix_len;
    lin.tokens.reserve(n);
    lin.position_ids.reserve(n);
    lin.parents.reserve(n);
    lin.tree_mask.assign(n * n, 0);
    for (const TreeNode& node : tree.nodes()) {
        const auto i = static_cast<std::size_t>(node.id);
        lin.tokens.push_back(node.token);
        lin.position_ids.push_back(node.depth);
        lin.parents.push_back(node.parent);
        // Parents precede children in insertion order, so the parent's row is
        // already final: copy it and add self.
        if (node.parent != kNoParent) {
            const auto p = static_cast<std::size_t>(node.parent);
            std::copy_n(lin.tree_mask.begin() + static_cast<std::ptrdiff_t>(p * n), i,
                        lin.tree_mask.begin() + static_cast<std::ptrdiff_t>(i * n));
        }
        lin.tree_mask[i * n + i] = 1;
    }
    return lin;
}

SimCache::SimCache(std::vector<Token> tokens) : tokens_(std::move(tokens)), hash_(ContextHash::of(tokens_)) {}

void SimCache::append(Token t) {
    tokens_.push_back(t);
    hash_ = hash_.extended(t);
}

SimCache make_prompt(std::size_t length, std::size_t vocab_size, std::uint64_t seed) {
    if (length == 0 || vocab_size == 0) {
        throw std::invalid_argument("make_prompt: length and vocab_size must be >= 1");
    }
    std::vector<Token> tokens(length);
    const std::uint64_t key = mix(seed, kPromptSalt);
    for (std::size_t i = 0; i < length; ++i) {
        tokens[i] = static_cast<Token>(to_unit(mix(key, i)) * static_cast<double>(vocab_size));
    }
    return SimCache(std::move(tokens));
}

AcceptanceRecord verify_tree(const LinearizedTree& lin, const DraftTree& tree, const TargetRule& target,
                             double temperature, const SimCache& cache) {
    if (!(temperature >= 0.0)) {
        throw std::invalid_argument("verify_tree: temperature must be >= 0");
    }
    if (lin.tree_len() != tree.size()) {
        throw std::invalid_argument("verify_tree: linearized tree does not match the draft tree");
    }
    // The target's context at node i is cache ++ path(i). Fingerprints follow
    // the parent column of the linearized input.
    std::vector<ContextHash> context(lin.tree_len());
    context[0] = cache.hash();
    for (std::size_t i = 1; i < lin.tree_len(); ++i) {
        context[i] = context[static_cast<std::size_t>(lin.parents[i])].extended(lin.tokens[i]);
    }

    AcceptanceRecord rec;
    NodeId u = 0;
    rec.accepted_path.push_back(u);
    for (;;) {
        Token want = target.choose(context[static_cast<std::size_t>(u)], temperature);
        std::optional<NodeId> next = tree.find_child(u, want);
        if (!next) {
            rec.bonus_token = want;
            break;
        }
        u = *next;
        rec.accepted_path.push_back(u);
        rec.accepted_tokens.push_back(want);
    }
    rec.accepted_len = rec.accepted_tokens.size() + 1;
    return rec;
}

SimCache commit(const SimCache& cache, const AcceptanceRecord& rec, const DraftTree& tree) {
    const auto& path = rec.accepted_path;
    if (path.empty() || path.front() != 0 || rec.accepted_tokens.size() + 1 != path.size() ||
        rec.accepted_len != path.size() || rec.bonus_token == kNoToken) {
        throw std::invalid_argument("commit: malformed acceptance record");
    }
    for (std::size_t k = 1; k < path.size(); ++k) {
        if (path[k] < 0 || static_cast<std::size_t>(path[k]) >= tree.size()) {
            throw std::invalid_argument("commit: accepted node not in tree");
        }
        const TreeNode& node = tree.node(path[k]);
        if (node.parent != path[k - 1] || node.token != rec.accepted_tokens[k - 1]) {
            throw std::invalid_argument("commit: accepted path is not a root chain of the tree");
        }
    }
    SimCache next = cache;
    for (Token t : rec.accepted_tokens) {
        next.append(t);
    }
    next.append(rec.bonus_token);
    return next;
}

SimCache ar_decode(const TargetRule& target, SimCache cache, std::size_t n_tokens, double temperature) {
    for (std::size_t i = 0; i < n_tokens; ++i) {
        cache.append(target.choose(cache.hash(), temperature));
    }
    return cache;
}

double SimulatedHardware::noise_free_latency(const LatencyQuery& q) const {
    return slope * roofline_latency(params, q) + intercept;
}

double SimulatedHardware::verify_latency(const LatencyQuery& q, std::uint64_t nonce) const {
    double base = noise_free_latency(q);
    if (noise == 0.0) {
        return base;
    }
    std::uint64_t key = mix(mix(mix(seed, kNoiseSalt), nonce), mix(static_cast<std::uint64_t>(q.s),
                                                                   static_cast<std::uint64_t>(q.c)));
    // Uniform on [-sqrt3, sqrt3) has unit variance.
    double eps = (2.0 * to_unit(key) - 1.0) * std::sqrt(3.0);
    return base * std::max(0.0, 1.0 + noise * eps);
}

std::string Policy::name() const {
    switch (kind) {
    case Kind::adaptive:
        return "adaptive";
    case Kind::fixed:
        return "fixed-" + std::to_string(n);
    case Kind::greedy_chain:
        return "greedy-chain";
    case Kind::beam:
        return "beam-" + std::to_string(width) + "x" + std::to_string(depth);
    }
    return "?";
}

Policy Policy::parse(const std::string& text) {
    if (text == "adaptive") {
        return adaptive();
    }
    if (text == "greedy-chain" || text == "greedy_chain" || text == "chain") {
        return greedy_chain();
    }
    std::string_view sv(text);
    if (sv.starts_with("fixed-") || sv.starts_with("fixed:")) {
        std::size_t n = parse_size(sv.substr(6), text);
        if (n == 0) {
            throw std::invalid_argument("bad policy '" + text + "': budget must be >= 1");
        }
        return fixed(n);
    }
    if (sv.starts_with("beam-") || sv.starts_with("beam:")) {
        std::string_view rest = sv.substr(5);
        std::size_t sep = rest.find_first_of("x:");
        if (sep == std::string_view::npos) {
            throw std::invalid_argument("bad policy '" + text + "': expected beam-WxD");
        }
        std::size_t w = parse_size(rest.substr(0, sep), text);
        std::size_t d = parse_size(rest.substr(sep + 1), text);
        if (w == 0 || d == 0) {
            throw std::invalid_argument("bad policy '" + text + "': width and depth must be >= 1");
        }
        return beam(w, d);
    }
    throw std::invalid_argument("unknown policy '" + text + "'");
}

DraftTree plan_tree(const CandidateLattice& lattice, const Policy& policy, BudgetController* controller,
                    std::int64_t context_len) {
    switch (policy.kind) {
    case Policy::Kind::adaptive:
        if (controller == nullptr) {
            throw std::invalid_argument("plan_tree: adaptive policy needs a controller");
        }
        return controller->plan(lattice, context_len).tree;
    case Policy::Kind::fixed:
        return best_first_expand(lattice, policy.n);
    case Policy::Kind::greedy_chain:
        return beam_expand(lattice, 1, lattice.gamma());
    case Policy::Kind::beam:
        return beam_expand(lattice, policy.width, std::min(policy.depth, lattice.gamma()));
    }
    throw std::invalid_argument("plan_tree: unknown policy");
}

DecodeResult decode(const SyntheticPair& pair, const DecodeConfig& cfg, const Policy& policy) {
    cfg.controller.validate();
    if (cfg.run_length == 0) {
        throw std::invalid_argument("decode: run_length must be >= 1");
    }
    std::optional<BudgetController> controller;
    if (policy.kind == Policy::Kind::adaptive) {
        if (!cfg.estimator) {
            throw std::invalid_argument("decode: adaptive policy needs a latency estimator");
        }
        controller.emplace(cfg.controller, *cfg.estimator);
    }
    const CycleLatencies& lat = cfg.controller.latencies;

    DecodeResult result;
    result.cache = make_prompt(cfg.prompt_len, pair.config().vocab_size, cfg.prompt_seed);
    result.prompt_len = result.cache.size();
    std::size_t committed = 0;
    for (std::size_t cycle = 0; committed < cfg.run_length; ++cycle) {
        auto block = std::make_shared<const MarginalBlock>(pair.draft(result.cache.hash()));
        CandidateLattice lattice = top_k_truncate(block, std::min(cfg.top_k, block->vocab_size()));
        // The last committed token is the root and is re-fed with the tree.
        const std::size_t prefix_len = result.cache.size() - 1;
        const auto ctx = static_cast<std::int64_t>(prefix_len);

        DraftTree tree = plan_tree(lattice, policy, controller ? &*controller : nullptr, ctx);
        LinearizedTree lin = linearize(tree, prefix_len);
        AcceptanceRecord rec = verify_tree(lin, tree, pair.target(), cfg.temperature, result.cache);
        result.cache = commit(result.cache, rec, tree);

        const std::size_t n = tree.draft_count();
        double t_verify = cfg.hardware.verify_latency({verified_tokens(n), ctx}, cycle);
        if (controller) {
            controller->record_verify(n, ctx, t_verify);
        }
        CycleRecord r;
        r.cycle = cycle;
        r.tree_size = n;
        r.accepted_len = rec.accepted_len;
        r.surrogate = tree.surrogate();
        r.t_draft = lat.t_draft;
        r.t_verify = t_verify;
        r.t_aux = lat.t_aux;
        r.l_ar = lat.l_ar;
        result.records.push_back(r);
        committed += rec.accepted_len;
    }
    return result;
}

double realized_speedup(std::span<const CycleRecord> records) {
    if (records.empty()) {
        throw std::invalid_argument("realized_speedup: no cycles");
    }
    const double l_ar = records.front().l_ar;
    std::size_t tokens = 0;
    double time = 0.0;
    for (const CycleRecord& r : records) {
        if (r.l_ar != l_ar) {
            throw std::invalid_argument("realized_speedup: l_ar differs between cycles");
        }
        tokens += r.accepted_len;
        time += r.cycle_time();
    }
    if (!(time > 0.0)) {
        throw std::invalid_argument("realized_speedup: total cycle time must be positive");
    }
    return static_cast<double>(tokens) * l_ar / time;
}

} // namespace spectree
