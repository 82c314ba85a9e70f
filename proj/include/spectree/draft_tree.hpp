// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "spectree/common.hpp"
#include "spectree/lattice.hpp"

namespace spectree {

/// One candidate token. The root (id 0) is the last committed token; it has
/// depth 0, no token and path_score exactly 1.
struct TreeNode {
    NodeId id = 0;
    NodeId parent = kNoParent;
    int depth = 0;
    Token token = kNoToken;
    /// Product of drafter probabilities along the root-to-node path.
    double path_score = 1.0;
    /// Rank of `token` within the lattice row it was drawn from, -1 if unknown.
    int rank = -1;
};

enum class TreeOrigin { manual, best_first, beam };

/**
 * Prefix-closed candidate tree. Nodes are kept in insertion order, which for
 * best-first trees is the expansion order, so the first m+1 nodes of a
 * best-first tree are exactly its size-m predecessor.
 */
class DraftTree {
  public:
    DraftTree();

    /// Adds a child of `parent` with drafter probability `prob` at the child's
    /// depth. Rejects unknown parents, duplicate (parent, token) pairs and
    /// probabilities outside [0,1].
    NodeId add_child(NodeId parent, Token token, double prob, int rank = -1);

    /// Adds a child with an explicit path score (used when reading trees back
    /// from text). The score must not exceed the parent's.
    NodeId add_child_with_score(NodeId parent, Token token, double path_score, int rank = -1);

    std::size_t size() const noexcept { return nodes_.size(); }
    /// Non-root node count, the verification budget N.
    std::size_t draft_count() const noexcept { return nodes_.size() - 1; }

    std::span<const TreeNode> nodes() const noexcept { return nodes_; }
    const TreeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const TreeNode& root() const noexcept { return nodes_.front(); }
    std::span<const NodeId> children(NodeId id) const { return children_.at(static_cast<std::size_t>(id)); }
    std::optional<NodeId> find_child(NodeId parent, Token token) const;
    int max_depth() const noexcept { return max_depth_; }

    /// Running sum of path scores maintained on insertion.
    double surrogate() const noexcept { return surrogate_; }

    TreeOrigin origin() const noexcept { return origin_; }
    void set_origin(TreeOrigin origin) noexcept { origin_ = origin; }

    /// Tokens on the root-to-node path, root excluded.
    std::vector<Token> path_tokens(NodeId id) const;

    /// Tree made of the root and the first `draft_count` inserted nodes.
    DraftTree prefix(std::size_t draft_count) const;

  private:
    NodeId insert(NodeId parent, Token token, double path_score, int rank);

    std::vector<TreeNode> nodes_;
    std::vector<std::vector<NodeId>> children_;
    double surrogate_ = 1.0;
    int max_depth_ = 0;
    TreeOrigin origin_ = TreeOrigin::manual;
};

/**
 * Lazy best-first frontier over a candidate lattice. Initially holds only the
 * best depth-1 candidate. Each pop inserts the node into the tree, then pushes
 * that node's highest-probability child and its next-ranked sibling. Ordering
 * is path score descending, then depth, token and parent id ascending.
 */
class ExpansionFrontier {
  public:
    explicit ExpansionFrontier(const CandidateLattice& lattice);

    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }
    /// Path score of the next node that expand_into() would add.
    double peek_score() const { return heap_.top().path_score; }

    /// Pops the best candidate into `tree` and returns it.
    const TreeNode& expand_into(DraftTree& tree);

  private:
    struct Candidate {
        double path_score;
        int depth;
        Token token;
        NodeId parent;
        int rank;
    };
    struct Worse {
        bool operator()(const Candidate& a, const Candidate& b) const noexcept {
            if (a.path_score != b.path_score) return a.path_score < b.path_score;
            if (a.depth != b.depth) return a.depth > b.depth;
            if (a.token != b.token) return a.token > b.token;
            return a.parent > b.parent;
        }
    };

    void push(NodeId parent, double parent_score, int depth, int rank);

    const CandidateLattice* lattice_;
    std::priority_queue<Candidate, std::vector<Candidate>, Worse> heap_;
};

/// Greedily adds the frontier node of largest path score until the tree holds
/// min(n_max, lattice.reachable_size()) draft nodes.
DraftTree best_first_expand(const CandidateLattice& lattice, std::size_t n_max);

/// Level-synchronous beam: at each depth 1..depth keeps the `width` best
/// extensions (by cumulative path score) of the previous level's survivors.
DraftTree beam_expand(const CandidateLattice& lattice, std::size_t width, std::size_t depth);

/// Sum of path scores over all nodes, root included, recomputed from scratch.
double surrogate_of(const DraftTree& tree);

/// Path scores of draft nodes in expansion order, i.e. the per-step surrogate
/// gains. Throws ContractViolation unless the tree came from best-first
/// expansion and the gains are non-increasing.
std::vector<double> marginal_gains(const DraftTree& tree);

/// Lines of "id parent depth token path_score"; the root is "0 -1 0 -1 1".
void write_tree(std::ostream& out, const DraftTree& tree);
DraftTree read_tree(std::istream& in);

} // namespace spectree
