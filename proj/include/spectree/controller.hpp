// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spectree/cost_model.hpp"
#include "spectree/draft_tree.hpp"
#include "spectree/lattice.hpp"

namespace spectree {

struct CycleLatencies {
    double t_draft = 0.0;
    double t_aux = 0.0;
    /// One autoregressive target step, seconds.
    double l_ar = 1.0;
};

struct ControllerConfig {
    std::size_t n_max = 1024;
    CycleLatencies latencies;
    EstimatorVariant variant = EstimatorVariant::static_calib;
    /// Tokens already in the target's KV cache (c_t).
    std::int64_t context_len = 0;

    void validate() const;
};

enum class StopReason { first_decrease, frontier_exhausted, budget_cap };

std::string to_string(StopReason r);

struct ControllerDecision {
    DraftTree tree;
    /// Draft nodes in `tree`, N*.
    std::size_t budget = 0;
    /// Estimated speedup for N = 1..stop; element N-1 belongs to budget N.
    std::vector<double> s_hat_trace;
    StopReason stop_reason = StopReason::budget_cap;
};

/// Number of tokens a tree with n draft nodes puts through verification:
/// the drafts plus the root/bonus token.
constexpr std::int64_t verified_tokens(std::size_t n_draft) noexcept {
    return static_cast<std::int64_t>(n_draft) + 1;
}

/**
 * One planning cycle. Expands best-first one node at a time, tracking
 * S(N) = A(N) * L_AR / (T_draft + T_verify(N) + T_aux) with A updated
 * incrementally. Stops at the first N whose estimate does not improve on the
 * best so far (equal values stop too), when the lattice runs out, or at
 * n_max. The returned tree is the best-scoring prefix.
 *
 * `cfg.variant` selects the estimator form; `model` supplies the roofline
 * parameters, calibration fit and EMA bias.
 */
ControllerDecision run_cycle(const CandidateLattice& lattice, const ControllerConfig& cfg,
                             const LatencyEstimator& model);

/// The stopping rule on precomputed gains and costs (costs[i] is C(i+1)).
/// Requires non-negative, non-increasing gains and positive costs.
ControllerDecision replay_trace(std::span<const double> surrogate_gains, std::span<const double> cost_curve,
                                double l_ar);

/// One controller per decoding stream: owns the config and the mutable EMA
/// state of its latency estimator.
class BudgetController {
  public:
    BudgetController(ControllerConfig cfg, LatencyEstimator model);

    ControllerDecision plan(const CandidateLattice& lattice, std::int64_t context_len);
    /// Feeds back the measured verification latency for the executed tree.
    void record_verify(std::size_t n_draft, std::int64_t context_len, double observed_seconds);

    const ControllerConfig& config() const noexcept { return cfg_; }
    const LatencyEstimator& model() const noexcept { return model_; }

  private:
    ControllerConfig cfg_;
    LatencyEstimator model_;
};

} // namespace spectree
