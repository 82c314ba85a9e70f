// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/controller.hpp"

#include <limits>
#include <stdexcept>

namespace spectree {

void ControllerConfig::validate() const {
    if (n_max < 1) {
        throw std::invalid_argument("ControllerConfig: n_max must be >= 1");
    }
    if (latencies.t_draft < 0.0 || latencies.t_aux < 0.0) {
        throw std::invalid_argument("ControllerConfig: t_draft and t_aux must be >= 0");
    }
    if (!(latencies.l_ar > 0.0)) {
        throw std::invalid_argument("ControllerConfig: l_ar must be > 0");
    }
    if (context_len < 0) {
        throw std::invalid_argument("ControllerConfig: negative context length");
    }
}

std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::first_decrease:
        return "first-decrease";
    case StopReason::frontier_exhausted:
        return "frontier-exhausted";
    case StopReason::budget_cap:
        return "budget-cap";
    }
    return "?";
}

ControllerDecision run_cycle(const CandidateLattice& lattice, const ControllerConfig& cfg,
                             const LatencyEstimator& model) {
    cfg.validate();
    if (lattice.empty()) {
        throw std::invalid_argument("run_cycle: empty lattice");
    }
    const CycleLatencies& lat = cfg.latencies;

    ControllerDecision decision;
    decision.stop_reason = StopReason::budget_cap;
    decision.s_hat_trace.reserve(std::min<std::size_t>(cfg.n_max, 4096));

    DraftTree tree;
    tree.set_origin(TreeOrigin::best_first);
    ExpansionFrontier frontier(lattice);

    double a_hat = 1.0; // root/bonus contribution
    double best_s = -std::numeric_limits<double>::infinity();
    std::size_t best_n = 0;
    for (std::size_t n = 1; n <= cfg.n_max; ++n) {
        if (frontier.empty()) {
            decision.stop_reason = StopReason::frontier_exhausted;
            break;
        }
        const TreeNode& u = frontier.expand_into(tree);
        a_hat += u.path_score;
        double t_verify = estimate_verify_latency(cfg.variant, model.params(),
                                                  {verified_tokens(n), cfg.context_len}, model.fit(), model.bias());
        double c_hat = lat.t_draft + t_verify + lat.t_aux;
        if (!(c_hat > 0.0)) {
            throw std::invalid_argument("run_cycle: estimated cycle cost must be positive");
        }
        double s_hat = a_hat * lat.l_ar / c_hat;
        decision.s_hat_trace.push_back(s_hat);
        if (s_hat > best_s) {
            best_s = s_hat;
            best_n = n;
        } else {
            decision.stop_reason = StopReason::first_decrease;
            break;
        }
    }

    decision.budget = best_n;
    decision.tree = best_n == tree.draft_count() ? std::move(tree) : tree.prefix(best_n);
    return decision;
}

ControllerDecision replay_trace(std::span<const double> surrogate_gains, std::span<const double> cost_curve,
                                double l_ar) {
    if (surrogate_gains.empty() || surrogate_gains.size() != cost_curve.size()) {
        throw std::invalid_argument("replay_trace: gains and costs must be non-empty and equally long");
    }
    if (!(l_ar > 0.0)) {
        throw std::invalid_argument("replay_trace: l_ar must be > 0");
    }
    for (std::size_t i = 0; i < surrogate_gains.size(); ++i) {
        if (!(surrogate_gains[i] >= 0.0)) {
            throw std::invalid_argument("replay_trace: negative gain");
        }
        if (i > 0 && surrogate_gains[i] > surrogate_gains[i - 1]) {
            throw std::invalid_argument("replay_trace: gains are not non-increasing (surrogate not concave)");
        }
        if (!(cost_curve[i] > 0.0)) {
            throw std::invalid_argument("replay_trace: non-positive cost");
        }
    }

    ControllerDecision decision;
    decision.stop_reason = StopReason::budget_cap;
    double a_hat = 1.0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < surrogate_gains.size(); ++i) {
        a_hat += surrogate_gains[i];
        double s_hat = a_hat * l_ar / cost_curve[i];
        decision.s_hat_trace.push_back(s_hat);
        if (s_hat > best_s) {
            best_s = s_hat;
            decision.budget = i + 1;
        } else {
            decision.stop_reason = StopReason::first_decrease;
            break;
        }
    }
    return decision;
}

BudgetController::BudgetController(ControllerConfig cfg, LatencyEstimator model)
    : cfg_(cfg), model_(std::move(model)) {
    cfg_.validate();
}

ControllerDecision BudgetController::plan(const CandidateLattice& lattice, std::int64_t context_len) {
    cfg_.context_len = context_len;
    return run_cycle(lattice, cfg_, model_);
}

void BudgetController::record_verify(std::size_t n_draft, std::int64_t context_len, double observed_seconds) {
    model_.observe({verified_tokens(n_draft), context_len}, observed_seconds);
}

} // namespace spectree
