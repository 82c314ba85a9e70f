// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Random fixtures shared by the test suites and the `oracle-check` command,
 * plus the bridge suite itself: each check runs a production routine against
 * its brute-force reference on seeded fixtures.
 */

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spectree/common.hpp"
#include "spectree/cost_model.hpp"
#include "spectree/draft_tree.hpp"
#include "spectree/lattice.hpp"

namespace spectree {

/// Rows drawn uniformly from the probability simplex (normalized exponentials).
MarginalBlock random_block(RandomStream& rng, std::size_t gamma, std::size_t vocab_size);

/// Random prefix-closed tree with `n_draft` nodes over the block's tokens.
/// Each new node picks a random existing parent with free capacity below
/// depth gamma and a random unused token.
DraftTree random_tree(RandomStream& rng, const MarginalBlock& block, std::size_t n_draft);

/// Non-increasing positive gains and positive convex increasing costs, i.e. a
/// concave surrogate over a convex cost curve.
struct ConcaveConvexCase {
    std::vector<double> gains;
    std::vector<double> costs;
    double l_ar = 1.0;
};
ConcaveConvexCase random_concave_convex(RandomStream& rng, std::size_t length);

/// A dense model in the 8B class used where no profile file is given.
CostModelParams reference_model_params();

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct OverheadReport {
    std::size_t cycles = 0;
    std::size_t expanded_nodes = 0;
    double seconds = 0.0;

    double micros_per_node() const noexcept {
        return expanded_nodes == 0 ? 0.0 : 1e6 * seconds / static_cast<double>(expanded_nodes);
    }
};

/// Wall-clock cost of the controller's plan step (frontier pops, surrogate
/// update, latency estimate, stop test) per node it expands, on lattices of
/// gamma 16, K 8 with a budget that lets each cycle run to n_max.
OverheadReport measure_controller_overhead(std::uint64_t seed, std::size_t cycles = 200,
                                           std::size_t n_max = 1024);

/// Seeded bridge checks; names are stable and one line each in the CLI.
std::vector<CheckResult> run_oracle_bridge(std::uint64_t seed);

} // namespace spectree
