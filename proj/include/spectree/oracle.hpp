// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Brute-force references for the tree planner.
 *
 * Nothing here calls into the planner's algorithms: paths are recovered by
 * walking parent pointers, coverage is counted node by node against the
 * definition, and optimal trees come from exhaustive enumeration. The
 * outcome-enumeration and Monte-Carlo kernels exist in an OpenMP version and
 * a `_serial` reference. Both split the work into the same fixed chunks and
 * reduce in chunk order, so the two return bit-identical results for any
 * thread count.
 */

#include <cstddef>
#include <span>
#include <vector>

#include "spectree/common.hpp"
#include "spectree/draft_tree.hpp"
#include "spectree/lattice.hpp"

namespace spectree {

inline constexpr std::size_t kMaxEnumeratedOutcomes = 1'000'000;
inline constexpr std::size_t kMaxEnumeratedDepth = 4;
inline constexpr std::size_t kMaxEnumeratedTopK = 3;
inline constexpr std::size_t kMaxEnumeratedNodes = 12;

/// E_X[#{i : X_{1:d(i)} = path(i)}] by summing over every outcome X in V^gamma.
/// Throws OracleRefusal when V^gamma exceeds kMaxEnumeratedOutcomes.
double exact_expected_commit(const DraftTree& tree, const MarginalBlock& block);
double exact_expected_commit_serial(const DraftTree& tree, const MarginalBlock& block);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
};

/// Self-verification simulation: draw X from the block, count covered nodes.
/// Every sample's covered set is checked to be one root-anchored chain; a
/// violation throws ContractViolation.
MonteCarloEstimate monte_carlo_commit(const DraftTree& tree, const MarginalBlock& block, std::size_t n_samples,
                                      RandomStream& rng);
MonteCarloEstimate monte_carlo_commit_serial(const DraftTree& tree, const MarginalBlock& block,
                                             std::size_t n_samples, RandomStream& rng);

struct OptimalTree {
    double best_surrogate = 0.0;
    DraftTree witness;
};

/// Maximum surrogate over all prefix-closed trees with exactly n draft nodes,
/// found by exhaustive enumeration. Refuses lattices beyond gamma 4, K 3 or
/// n 12.
OptimalTree enumerate_optimal_tree(const CandidateLattice& lattice, std::size_t n);

/// Same search, one pass for every size 1..n_max; element n-1 is size n.
std::vector<OptimalTree> enumerate_optimal_trees(const CandidateLattice& lattice, std::size_t n_max);

/// Number of prefix-closed trees of each size 1..n_max visited by the
/// enumerator (element n-1 is size n). Used to check the enumeration itself.
std::vector<std::size_t> count_prefix_closed_trees(const CandidateLattice& lattice, std::size_t n_max);

/// 1-based argmax of surrogates[i] * l_ar / costs[i] over every index, ties
/// to the smaller index. No unimodality assumption.
std::size_t scan_optimal_budget(std::span<const double> surrogates, std::span<const double> costs, double l_ar);

} // namespace spectree
