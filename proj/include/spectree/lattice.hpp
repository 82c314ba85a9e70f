// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Drafter marginals and the top-K candidate lattice.
 *
 * A block drafter emits one token distribution per future position, all
 * conditioned on the committed context only. MarginalBlock stores those rows;
 * CandidateLattice keeps the K most likely tokens of each row, which
 * implicitly defines a prefix tree with K children per node and depth gamma.
 *
 * SyntheticPair produces drafter blocks together with a TargetRule whose
 * greedy choices agree with the drafter's argmax at a configurable rate, so
 * the whole decoding stack can be exercised without a model.
 */

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "spectree/common.hpp"
#include "spectree/target_rule.hpp"

namespace spectree {

/// Per-position token distributions q_1..q_gamma, stored row-major.
class MarginalBlock {
  public:
    static constexpr double kRowSumTolerance = 1e-9;

    /// Validates shape, entry range and row sums; throws std::invalid_argument.
    MarginalBlock(std::size_t gamma, std::size_t vocab_size, std::vector<double> probs);

    static MarginalBlock from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t gamma() const noexcept { return gamma_; }
    std::size_t vocab_size() const noexcept { return vocab_size_; }

    /// Row for 0-based `position`, i.e. q_{position+1}.
    std::span<const double> row(std::size_t position) const;
    double prob(std::size_t position, Token token) const;
    Token argmax(std::size_t position) const;

    friend bool operator==(const MarginalBlock&, const MarginalBlock&) = default;

  private:
    std::size_t gamma_;
    std::size_t vocab_size_;
    std::vector<double> probs_;
};

struct LatticeEntry {
    Token token;
    double prob;
    friend bool operator==(const LatticeEntry&, const LatticeEntry&) = default;
};

/// Top-K entries per position, sorted by probability descending with ties
/// broken by ascending token id. A default-constructed lattice is empty.
class CandidateLattice {
  public:
    CandidateLattice() = default;
    CandidateLattice(std::shared_ptr<const MarginalBlock> source, std::size_t top_k,
                     std::vector<LatticeEntry> entries);

    bool empty() const noexcept { return gamma_ == 0 || top_k_ == 0; }
    std::size_t gamma() const noexcept { return gamma_; }
    std::size_t top_k() const noexcept { return top_k_; }
    const MarginalBlock& source() const;
    const std::shared_ptr<const MarginalBlock>& source_ptr() const noexcept { return source_; }

    /// The K ranked entries of 0-based `position`.
    std::span<const LatticeEntry> entries(std::size_t position) const;
    const LatticeEntry& entry(std::size_t position, std::size_t rank) const {
        return entries_[position * top_k_ + rank];
    }

    /// Number of non-root nodes in the implied prefix tree, sum_{d=1..gamma} K^d,
    /// saturated at SIZE_MAX.
    std::size_t reachable_size() const noexcept;

  private:
    std::shared_ptr<const MarginalBlock> source_;
    std::size_t gamma_ = 0;
    std::size_t top_k_ = 0;
    std::vector<LatticeEntry> entries_;
};

/// Keeps the k most likely tokens per position. Throws std::invalid_argument
/// unless 1 <= k <= vocab_size.
CandidateLattice top_k_truncate(const MarginalBlock& block, std::size_t k);
CandidateLattice top_k_truncate(std::shared_ptr<const MarginalBlock> block, std::size_t k);
/// Re-truncates an existing lattice to k <= lattice.top_k().
CandidateLattice top_k_truncate(const CandidateLattice& lattice, std::size_t k);

/// Draws X_k ~ q_k independently for every position.
std::vector<Token> sample_continuation(const MarginalBlock& block, RandomStream& rng);

/// Plain-text form: "gamma vocab_size" then gamma lines of V decimals.
void write_block(std::ostream& out, const MarginalBlock& block);
MarginalBlock read_block(std::istream& in);

struct SyntheticPairConfig {
    std::size_t gamma = 16;
    std::size_t vocab_size = 64;
    /// Probability that the drafter's argmax equals the target's greedy token.
    double alignment = 0.8;
    /// Inverse temperature on the drafter's rank logits; +inf gives one-hot rows.
    double concentration = 1.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/**
 * Drafter/target pair sharing one hidden "truth". For a committed context the
 * drafter first reads the target's greedy continuation t_1..t_gamma, then for
 * each position builds a rank-geometric distribution whose slope depends on a
 * per-context difficulty z ~ U(0,1). The target token lands on rank 1 with
 * probability g(z), an increasing affine map of the top probability whose mean
 * over z equals `alignment`; otherwise it lands on a lower rank drawn in
 * proportion to the drafter's own tail. Remaining tokens are shuffled into the
 * remaining ranks.
 */
class SyntheticPair {
  public:
    explicit SyntheticPair(SyntheticPairConfig cfg, TargetMode mode = TargetMode::greedy_aligned);

    const SyntheticPairConfig& config() const noexcept { return cfg_; }
    const TargetRule& target() const noexcept { return target_; }

    MarginalBlock draft(ContextHash context) const;
    MarginalBlock draft(std::span<const Token> context) const { return draft(ContextHash::of(context)); }

    /// E_z[top probability], the normalizer behind the alignment map.
    double mean_top_probability() const noexcept { return mean_top_; }

  private:
    double top_probability(double z) const;
    double agreement_probability(double top_probability) const;

    SyntheticPairConfig cfg_;
    TargetRule target_;
    double mean_top_;
};

struct GeneratedPair {
    MarginalBlock drafter;
    TargetRule target_rule;
};

/// Drafter block for the empty context plus the matching target rule.
GeneratedPair generate_synthetic_pair(const SyntheticPairConfig& cfg);

} // namespace spectree
