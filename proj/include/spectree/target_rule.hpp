// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spectree/common.hpp"

namespace spectree {

/// Rolling fingerprint of a token sequence. Two contexts with the same tokens
/// always hash equal; extending is O(1), so tree verification can derive the
/// fingerprint of every node from its parent's.
class ContextHash {
  public:
    constexpr ContextHash() = default;

    static ContextHash of(std::span<const Token> tokens) {
        ContextHash h;
        for (Token t : tokens) {
            h = h.extended(t);
        }
        return h;
    }

    constexpr ContextHash extended(Token t) const noexcept {
        ContextHash next;
        next.value_ = mix(value_, static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
        return next;
    }

    constexpr std::uint64_t value() const noexcept { return value_; }

    friend constexpr bool operator==(ContextHash, ContextHash) = default;

  private:
    std::uint64_t value_ = 0x5be0cd19137e2179ULL;
};

enum class TargetMode { greedy_aligned, sampled };

/// Synthetic stand-in for the target model. The greedy next token is a pure
/// function of (seed, full context). In sampled mode the target puts logit
/// `peak_logit` on its greedy token and 0 elsewhere, and a temperature>0 draw
/// is also a pure function of (seed, context), so re-querying the same
/// (prefix, position) always returns the same sample.
class TargetRule {
  public:
    TargetRule(std::size_t vocab_size, std::uint64_t seed, TargetMode mode = TargetMode::greedy_aligned,
               double peak_logit = 3.0);

    std::size_t vocab_size() const noexcept { return vocab_size_; }
    std::uint64_t seed() const noexcept { return seed_; }
    TargetMode mode() const noexcept { return mode_; }
    double peak_logit() const noexcept { return peak_logit_; }

    Token greedy_token(ContextHash context) const noexcept;

    /// Token the target emits after `context`. Greedy at temperature 0 or in
    /// greedy mode; otherwise a deterministic draw from distribution().
    Token choose(ContextHash context, double temperature) const;

    /// The target's next-token distribution at `temperature` (> 0).
    std::vector<double> distribution(ContextHash context, double temperature) const;

  private:
    std::size_t vocab_size_;
    std::uint64_t seed_;
    TargetMode mode_;
    double peak_logit_;
};

} // namespace spectree
