// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spectree {

namespace {

constexpr std::size_t kOutcomeChunks = 256;
constexpr std::size_t kSampleChunks = 64;

// Root-to-node token paths, rebuilt by walking parent pointers.
std::vector<std::vector<Token>> node_paths(const DraftTree& tree) {
    std::vector<std::vector<Token>> paths(tree.size());
    for (const TreeNode& n : tree.nodes()) {
        std::vector<Token> p;
        for (NodeId cur = n.id; cur != 0;) {
            const TreeNode& c = tree.node(cur);
            p.push_back(c.token);
            cur = c.parent;
        }
        std::reverse(p.begin(), p.end());
        paths[static_cast<std::size_t>(n.id)] = std::move(p);
    }
    return paths;
}

void check_tree_fits(const DraftTree& tree, const MarginalBlock& block) {
    for (const TreeNode& n : tree.nodes()) {
        if (static_cast<std::size_t>(n.depth) > block.gamma()) {
            throw std::invalid_argument("oracle: tree deeper than the block");
        }
        if (n.id != 0 && (n.token < 0 || static_cast<std::size_t>(n.token) >= block.vocab_size())) {
            throw std::invalid_argument("oracle: tree token outside the block vocabulary");
        }
    }
}

bool covers(const std::vector<Token>& path, const std::vector<Token>& outcome) {
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (path[k] != outcome[k]) {
            return false;
        }
    }
    return true;
}

struct Enumeration {
    std::size_t outcomes;
    std::vector<std::vector<Token>> paths;
};

Enumeration prepare_enumeration(const DraftTree& tree, const MarginalBlock& block) {
    check_tree_fits(tree, block);
    std::size_t total = 1;
    for (std::size_t k = 0; k < block.gamma(); ++k) {
        if (total > kMaxEnumeratedOutcomes / block.vocab_size()) {
            throw OracleRefusal("exact_expected_commit: V^gamma exceeds " + std::to_string(kMaxEnumeratedOutcomes) +
                                " outcomes; use monte_carlo_commit");
        }
        total *= block.vocab_size();
    }
    return {total, node_paths(tree)};
}

// Expected covered count restricted to outcomes [begin, end). Outcome index o
// encodes X with position 0 as the most significant base-V digit.
double expected_commit_range(const Enumeration& e, const MarginalBlock& block, std::size_t begin, std::size_t end) {
    const std::size_t gamma = block.gamma();
    const std::size_t v = block.vocab_size();
    std::vector<Token> x(gamma);
    double acc = 0.0;
    for (std::size_t o = begin; o < end; ++o) {
        std::size_t rem = o;
        for (std::size_t k = gamma; k-- > 0;) {
            x[k] = static_cast<Token>(rem % v);
            rem /= v;
        }
        double p = 1.0;
        for (std::size_t k = 0; k < gamma; ++k) {
            p *= block.row(k)[static_cast<std::size_t>(x[k])];
        }
        if (p == 0.0) {
            continue;
        }
        std::size_t covered = 0;
        for (const auto& path : e.paths) {
            covered += covers(path, x) ? 1 : 0;
        }
        acc += p * static_cast<double>(covered);
    }
    return acc;
}

std::size_t chunk_begin(std::size_t chunk, std::size_t chunks, std::size_t total) {
    return total / chunks * chunk + std::min(chunk, total % chunks);
}

struct SampleTally {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t violations = 0;
};

SampleTally sample_range(const std::vector<std::vector<Token>>& paths, const DraftTree& tree,
                         const MarginalBlock& block, std::size_t count, std::uint64_t seed) {
    RandomStream rng(seed);
    SampleTally t;
    std::vector<char> covered(paths.size());
    std::vector<int> per_depth(block.gamma() + 1);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<Token> x = sample_continuation(block, rng);
        std::fill(per_depth.begin(), per_depth.end(), 0);
        std::size_t n = 0;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            covered[i] = covers(paths[i], x) ? 1 : 0;
            if (covered[i]) {
                ++n;
                ++per_depth[static_cast<std::size_t>(tree.nodes()[i].depth)];
            }
        }
        bool chain = covered[0] != 0;
        for (std::size_t i = 1; i < paths.size() && chain; ++i) {
            if (covered[i] && !covered[static_cast<std::size_t>(tree.nodes()[i].parent)]) {
                chain = false;
            }
        }
        for (int c : per_depth) {
            chain = chain && c <= 1;
        }
        if (!chain) {
            ++t.violations;
        }
        double d = static_cast<double>(n);
        t.sum += d;
        t.sum_sq += d * d;
    }
    return t;
}

MonteCarloEstimate finish_estimate(const std::vector<SampleTally>& tallies, std::size_t n) {
    SampleTally all;
    for (const auto& t : tallies) {
        all.sum += t.sum;
        all.sum_sq += t.sum_sq;
        all.violations += t.violations;
    }
    if (all.violations != 0) {
        throw ContractViolation("monte_carlo_commit: " + std::to_string(all.violations) +
                                " samples produced a covered set that is not a root-anchored chain");
    }
    MonteCarloEstimate est;
    est.samples = n;
    est.mean = all.sum / static_cast<double>(n);
    if (n > 1) {
        double var = (all.sum_sq - all.sum * all.sum / static_cast<double>(n)) / static_cast<double>(n - 1);
        est.std_err = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
    return est;
}

std::vector<std::uint64_t> chunk_seeds(RandomStream& rng) {
    std::vector<std::uint64_t> seeds(kSampleChunks);
    for (auto& s : seeds) {
        s = rng();
    }
    return seeds;
}

} // namespace

double exact_expected_commit(const DraftTree& tree, const MarginalBlock& block) {
    Enumeration e = prepare_enumeration(tree, block);
    std::vector<double> partial(kOutcomeChunks, 0.0);
    const auto chunks = static_cast<std::int64_t>(kOutcomeChunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < chunks; ++c) {
        auto cu = static_cast<std::size_t>(c);
        partial[cu] = expected_commit_range(e, block, chunk_begin(cu, kOutcomeChunks, e.outcomes),
                                            chunk_begin(cu + 1, kOutcomeChunks, e.outcomes));
    }
    double total = 0.0;
    for (double p : partial) {
        total += p;
    }
    return total;
}

double exact_expected_commit_serial(const DraftTree& tree, const MarginalBlock& block) {
    Enumeration e = prepare_enumeration(tree, block);
    double total = 0.0;
    for (std::size_t c = 0; c < kOutcomeChunks; ++c) {
        total += expected_commit_range(e, block, chunk_begin(c, kOutcomeChunks, e.outcomes),
                                       chunk_begin(c + 1, kOutcomeChunks, e.outcomes));
    }
    return total;
}

MonteCarloEstimate monte_carlo_commit(const DraftTree& tree, const MarginalBlock& block, std::size_t n_samples,
                                      RandomStream& rng) {
    if (n_samples < 1) {
        throw std::invalid_argument("monte_carlo_commit: n_samples must be >= 1");
    }
    check_tree_fits(tree, block);
    auto paths = node_paths(tree);
    auto seeds = chunk_seeds(rng);
    std::vector<SampleTally> tallies(kSampleChunks);
    const auto chunks = static_cast<std::int64_t>(kSampleChunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < chunks; ++c) {
        auto cu = static_cast<std::size_t>(c);
        std::size_t count = chunk_begin(cu + 1, kSampleChunks, n_samples) - chunk_begin(cu, kSampleChunks, n_samples);
        tallies[cu] = sample_range(paths, tree, block, count, seeds[cu]);
    }
    return finish_estimate(tallies, n_samples);
}

MonteCarloEstimate monte_carlo_commit_serial(const DraftTree& tree, const MarginalBlock& block,
                                             std::size_t n_samples, RandomStream& rng) {
    if (n_samples < 1) {
        throw std::invalid_argument("monte_carlo_commit: n_samples must be >= 1");
    }
    check_tree_fits(tree, block);
    auto paths = node_paths(tree);
    auto seeds = chunk_seeds(rng);
    std::vector<SampleTally> tallies(kSampleChunks);
    for (std::size_t c = 0; c < kSampleChunks; ++c) {
        std::size_t count = chunk_begin(c + 1, kSampleChunks, n_samples) - chunk_begin(c, kSampleChunks, n_samples);
        tallies[c] = sample_range(paths, tree, block, count, seeds[c]);
    }
    return finish_estimate(tallies, n_samples);
}

namespace {

struct LatticeNode {
    int parent;
    int depth;
    Token token;
    double rho;
    std::vector<int> children;
};

// Materializes the whole lattice tree. rho is the plain product of the row
// probabilities along the path.
std::vector<LatticeNode> materialize(const CandidateLattice& lattice) {
    std::vector<LatticeNode> nodes;
    nodes.push_back({-1, 0, kNoToken, 1.0, {}});
    std::vector<int> level{0};
    for (std::size_t pos = 0; pos < lattice.gamma(); ++pos) {
        std::vector<int> next;
        for (int p : level) {
            for (const LatticeEntry& e : lattice.entries(pos)) {
                double rho = 1.0;
                std::vector<double> probs{e.prob};
                for (int a = p; a != 0; a = nodes[static_cast<std::size_t>(a)].parent) {
                    const LatticeNode& an = nodes[static_cast<std::size_t>(a)];
                    probs.push_back(lattice.source().prob(static_cast<std::size_t>(an.depth - 1), an.token));
                }
                for (auto it = probs.rbegin(); it != probs.rend(); ++it) {
                    rho *= *it;
                }
                int id = static_cast<int>(nodes.size());
                nodes.push_back({p, static_cast<int>(pos) + 1, e.token, rho, {}});
                nodes[static_cast<std::size_t>(p)].children.push_back(id);
                next.push_back(id);
            }
        }
        level = std::move(next);
    }
    return nodes;
}

class SubtreeEnumerator {
  public:
    SubtreeEnumerator(std::vector<LatticeNode> nodes, std::size_t n_max)
        : nodes_(std::move(nodes)), n_max_(n_max), best_(n_max, -1.0), best_set_(n_max), counts_(n_max, 0) {}

    void run() {
        std::vector<int> candidates = nodes_[0].children;
        recurse(candidates, 0, 1.0);
    }

    const std::vector<double>& best() const { return best_; }
    const std::vector<std::vector<int>>& best_sets() const { return best_set_; }
    const std::vector<std::size_t>& counts() const { return counts_; }
    const std::vector<LatticeNode>& nodes() const { return nodes_; }

  private:
    // Each rooted subtree is produced once: a candidate skipped at this level
    // is never reconsidered deeper in the same branch.
    void recurse(std::vector<int>& candidates, std::size_t from, double sum) {
        for (std::size_t i = from; i < candidates.size(); ++i) {
            int v = candidates[i];
            const LatticeNode& node = nodes_[static_cast<std::size_t>(v)];
            chosen_.push_back(v);
            double s = sum + node.rho;
            std::size_t size = chosen_.size();
            ++counts_[size - 1];
            if (s > best_[size - 1]) {
                best_[size - 1] = s;
                best_set_[size - 1] = chosen_;
            }
            if (size < n_max_) {
                std::size_t old = candidates.size();
                candidates.insert(candidates.end(), node.children.begin(), node.children.end());
                recurse(candidates, i + 1, s);
                candidates.resize(old);
            }
            chosen_.pop_back();
        }
    }

    std::vector<LatticeNode> nodes_;
    std::size_t n_max_;
    std::vector<int> chosen_;
    std::vector<double> best_;
    std::vector<std::vector<int>> best_set_;
    std::vector<std::size_t> counts_;
};

SubtreeEnumerator run_enumeration(const CandidateLattice& lattice, std::size_t n_max) {
    if (lattice.empty()) {
        throw std::invalid_argument("enumerate_optimal_tree: empty lattice");
    }
    if (n_max < 1) {
        throw std::invalid_argument("enumerate_optimal_tree: n must be >= 1");
    }
    if (lattice.gamma() > kMaxEnumeratedDepth || lattice.top_k() > kMaxEnumeratedTopK ||
        n_max > kMaxEnumeratedNodes) {
        throw OracleRefusal("enumerate_optimal_tree: instance too large (limits gamma<=4, K<=3, n<=12)");
    }
    if (n_max > lattice.reachable_size()) {
        throw std::invalid_argument("enumerate_optimal_tree: n exceeds the lattice size");
    }
    SubtreeEnumerator e(materialize(lattice), n_max);
    e.run();
    return e;
}

DraftTree witness_tree(const std::vector<LatticeNode>& nodes, const std::vector<int>& set) {
    DraftTree tree;
    std::vector<NodeId> mapped(nodes.size(), kNoParent);
    mapped[0] = 0;
    for (int v : set) {
        const LatticeNode& n = nodes[static_cast<std::size_t>(v)];
        mapped[static_cast<std::size_t>(v)] =
            tree.add_child_with_score(mapped[static_cast<std::size_t>(n.parent)], n.token, n.rho);
    }
    return tree;
}

} // namespace

std::vector<OptimalTree> enumerate_optimal_trees(const CandidateLattice& lattice, std::size_t n_max) {
    SubtreeEnumerator e = run_enumeration(lattice, n_max);
    std::vector<OptimalTree> out;
    out.reserve(n_max);
    for (std::size_t n = 0; n < n_max; ++n) {
        out.push_back({e.best()[n], witness_tree(e.nodes(), e.best_sets()[n])});
    }
    return out;
}

OptimalTree enumerate_optimal_tree(const CandidateLattice& lattice, std::size_t n) {
    auto all = enumerate_optimal_trees(lattice, n);
    return std::move(all.back());
}

std::vector<std::size_t> count_prefix_closed_trees(const CandidateLattice& lattice, std::size_t n_max) {
    return run_enumeration(lattice, n_max).counts();
}

std::size_t scan_optimal_budget(std::span<const double> surrogates, std::span<const double> costs, double l_ar) {
    if (surrogates.empty() || surrogates.size() != costs.size()) {
        throw std::invalid_argument("scan_optimal_budget: sequences must be non-empty and equally long");
    }
    if (!(l_ar > 0.0)) {
        throw std::invalid_argument("scan_optimal_budget: l_ar must be > 0");
    }
    std::size_t best = 0;
    double best_s = 0.0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        if (!(costs[i] > 0.0)) {
            throw std::invalid_argument("scan_optimal_budget: non-positive cost at index " + std::to_string(i + 1));
        }
        double s = surrogates[i] * l_ar / costs[i];
        if (i == 0 || s > best_s) {
            best = i;
            best_s = s;
        }
    }
    return best + 1;
}

} // namespace spectree
