// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/controller.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spectree/oracle.hpp"
#include "spectree/oracle_check.hpp"

namespace spectree {
namespace {

LatencyEstimator static_model(CostModelParams p, double slope, double intercept) {
    return LatencyEstimator(EstimatorVariant::static_calib, p, CalibrationFit{slope, intercept, 0, 0}, std::nullopt);
}

ControllerConfig config(std::size_t n_max, double t_draft, std::int64_t ctx) {
    ControllerConfig cfg;
    cfg.n_max = n_max;
    cfg.latencies = {t_draft, 0.0005, 0.02};
    cfg.context_len = ctx;
    return cfg;
}

TEST(Replay, FixtureStopsAtThree) {
    // Gains of the best-first fixture; cost 1 + 0.15 N.
    const std::vector<double> gains{0.6, 0.42, 0.3, 0.21, 0.12, 0.06};
    std::vector<double> cost;
    for (std::size_t n = 1; n <= gains.size(); ++n) {
        cost.push_back(1.0 + 0.15 * static_cast<double>(n));
    }
    ControllerDecision d = replay_trace(gains, cost, 1.0);
    EXPECT_EQ(d.budget, 3u);
    EXPECT_EQ(d.stop_reason, StopReason::first_decrease);
    ASSERT_EQ(d.s_hat_trace.size(), 4u);
    EXPECT_NEAR(d.s_hat_trace[2], 2.32 / 1.45, 1e-12);
    std::vector<double> a;
    double sum = 1.0;
    for (double g : gains) {
        a.push_back(sum += g);
    }
    EXPECT_EQ(scan_optimal_budget(a, cost, 1.0), d.budget);
}

TEST(Replay, EqualEstimatesStop) {
    const std::vector<double> gains{1.0, 0.5, 0.5};
    const std::vector<double> cost{2.0, 2.5, 3.0};
    // S = 1.0, 1.0, ...: the tie stops at the first budget.
    ControllerDecision d = replay_trace(gains, cost, 1.0);
    EXPECT_EQ(d.budget, 1u);
    EXPECT_EQ(d.s_hat_trace.size(), 2u);
}

TEST(Replay, RunsToTheEndWhenAlwaysImproving) {
    const std::vector<double> gains{0.5, 0.4, 0.3};
    const std::vector<double> cost{1.0, 1.0, 1.0};
    ControllerDecision d = replay_trace(gains, cost, 1.0);
    EXPECT_EQ(d.budget, 3u);
    EXPECT_EQ(d.stop_reason, StopReason::budget_cap);
}

TEST(Replay, RejectsInvalidCurves) {
    const std::vector<double> up{0.1, 0.2};
    const std::vector<double> cost{1.0, 1.0};
    EXPECT_THROW(replay_trace(up, cost, 1.0), std::invalid_argument);
    const std::vector<double> gains{0.2, 0.1};
    const std::vector<double> zero{1.0, 0.0};
    EXPECT_THROW(replay_trace(gains, zero, 1.0), std::invalid_argument);
    const std::vector<double> shorter{1.0};
    EXPECT_THROW(replay_trace(gains, shorter, 1.0), std::invalid_argument);
    EXPECT_THROW(replay_trace(gains, cost, 0.0), std::invalid_argument);
    const std::vector<double> negative{-0.1, -0.2};
    EXPECT_THROW(replay_trace(negative, cost, 1.0), std::invalid_argument);
}

TEST(Replay, FirstDecreaseIsGlobalOnConcaveConvexCurves) {
    RandomStream rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        ConcaveConvexCase cc = random_concave_convex(rng, 1 + static_cast<std::size_t>(trial % 300));
        std::vector<double> a;
        double sum = 1.0;
        for (double g : cc.gains) {
            a.push_back(sum += g);
        }
        ASSERT_EQ(replay_trace(cc.gains, cc.costs, cc.l_ar).budget, scan_optimal_budget(a, cc.costs, cc.l_ar))
            << "trial " << trial;
    }
}

TEST(RunCycle, FlatCostExpandsUntilTheLatticeRunsOut) {
    RandomStream rng(4);
    CandidateLattice lat = top_k_truncate(random_block(rng, 3, 6), 3);
    LatencyEstimator flat = static_model(reference_model_params(), 1e-300, 1.0);
    ControllerDecision d = run_cycle(lat, config(1000, 0.0, 64), flat);
    EXPECT_EQ(d.budget, lat.reachable_size());
    EXPECT_EQ(d.stop_reason, StopReason::frontier_exhausted);
    ControllerDecision capped = run_cycle(lat, config(10, 0.0, 64), flat);
    EXPECT_EQ(capped.budget, 10u);
    EXPECT_EQ(capped.stop_reason, StopReason::budget_cap);
}

TEST(RunCycle, SingleNodeCap) {
    RandomStream rng(5);
    CandidateLattice lat = top_k_truncate(random_block(rng, 4, 10), 4);
    ControllerDecision d = run_cycle(lat, config(1, 0.004, 64), static_model(reference_model_params(), 1.0, 0.0));
    EXPECT_EQ(d.budget, 1u);
    EXPECT_EQ(d.tree.draft_count(), 1u);
}

TEST(RunCycle, BudgetMatchesExhaustiveScan) {
    RandomStream rng(6);
    CostModelParams p = reference_model_params();
    LatencyEstimator model = static_model(p, 1.15, 0.002);
    for (int trial = 0; trial < 60; ++trial) {
        CandidateLattice lat = top_k_truncate(random_block(rng, 12, 32), 8);
        ControllerConfig cfg = config(400, 0.001 + 0.0005 * (trial % 10), 64 + 100 * (trial % 5));
        ControllerDecision d = run_cycle(lat, cfg, model);
        DraftTree full = best_first_expand(lat, cfg.n_max);
        std::vector<double> a;
        std::vector<double> cost;
        for (std::size_t n = 1; n <= full.draft_count(); ++n) {
            a.push_back(full.prefix(n).surrogate());
            cost.push_back(cfg.latencies.t_draft + model.estimate({verified_tokens(n), cfg.context_len}) +
                           cfg.latencies.t_aux);
        }
        ASSERT_EQ(d.budget, scan_optimal_budget(a, cost, cfg.latencies.l_ar)) << "trial " << trial;
        ASSERT_EQ(d.tree.draft_count(), d.budget);
    }
}

TEST(RunCycle, IncrementalEstimatesMatchRecomputation) {
    RandomStream rng(7);
    CostModelParams p = reference_model_params();
    LatencyEstimator model = static_model(p, 1.0, 0.0);
    CandidateLattice lat = top_k_truncate(random_block(rng, 16, 64), 8);
    ControllerConfig cfg = config(1024, 1.0, 256);
    ControllerDecision d = run_cycle(lat, cfg, model);
    ASSERT_GT(d.s_hat_trace.size(), 50u);
    for (std::size_t i = 0; i < d.s_hat_trace.size(); ++i) {
        std::size_t n = i + 1;
        double a = surrogate_of(best_first_expand(lat, n));
        double c = cfg.latencies.t_draft + roofline_latency(p, {verified_tokens(n), 256}) + cfg.latencies.t_aux;
        ASSERT_NEAR(d.s_hat_trace[i], a * cfg.latencies.l_ar / c, 1e-9 * d.s_hat_trace[i]);
    }
}

TEST(RunCycle, ChosenBudgetIsTheTracePeak) {
    RandomStream rng(8);
    LatencyEstimator model = static_model(reference_model_params(), 1.2, 0.001);
    for (int trial = 0; trial < 30; ++trial) {
        CandidateLattice lat = top_k_truncate(random_block(rng, 10, 20), 6);
        ControllerDecision d = run_cycle(lat, config(1024, 0.003, 128), model);
        auto peak = std::max_element(d.s_hat_trace.begin(), d.s_hat_trace.end());
        ASSERT_EQ(static_cast<std::size_t>(peak - d.s_hat_trace.begin()) + 1, d.budget);
    }
}

TEST(RunCycle, IsDeterministic) {
    RandomStream rng(9);
    CandidateLattice lat = top_k_truncate(random_block(rng, 8, 16), 8);
    LatencyEstimator model = static_model(reference_model_params(), 1.0, 0.0);
    ControllerDecision x = run_cycle(lat, config(512, 0.002, 64), model);
    ControllerDecision y = run_cycle(lat, config(512, 0.002, 64), model);
    EXPECT_EQ(x.budget, y.budget);
    EXPECT_EQ(x.s_hat_trace, y.s_hat_trace);
}

TEST(RunCycle, RejectsInvalidConfigs) {
    RandomStream rng(10);
    CandidateLattice lat = top_k_truncate(random_block(rng, 2, 4), 2);
    LatencyEstimator model = static_model(reference_model_params(), 1.0, 0.0);
    EXPECT_THROW(run_cycle(lat, config(0, 0.0, 0), model), std::invalid_argument);
    EXPECT_THROW(run_cycle(lat, config(4, -1.0, 0), model), std::invalid_argument);
    EXPECT_THROW(run_cycle(lat, config(4, 0.0, -1), model), std::invalid_argument);
    EXPECT_THROW(run_cycle(CandidateLattice{}, config(4, 0.0, 0), model), std::invalid_argument);
    ControllerConfig bad_lar = config(4, 0.0, 0);
    bad_lar.latencies.l_ar = 0.0;
    EXPECT_THROW(run_cycle(lat, bad_lar, model), std::invalid_argument);
}

TEST(BudgetController, EmaObservationsShrinkBudgets) {
    RandomStream rng(11);
    CandidateLattice lat = top_k_truncate(random_block(rng, 16, 64), 8);
    CostModelParams p = reference_model_params();
    ControllerConfig cfg = config(1024, 0.002, 128);
    cfg.variant = EstimatorVariant::ema;
    BudgetController ctl(cfg, LatencyEstimator(EstimatorVariant::ema, p, std::nullopt, std::nullopt));
    std::size_t before = ctl.plan(lat, 128).budget;
    for (int i = 0; i < 100; ++i) {
        ctl.record_verify(before, 128, 5.0 * roofline_latency(p, {verified_tokens(before), 128}));
    }
    EXPECT_NEAR(ctl.model().bias()->ratio_bias, 5.0, 1e-3);
    EXPECT_LE(ctl.plan(lat, 128).budget, before);
}

TEST(StopReasonText, Names) {
    EXPECT_EQ(to_string(StopReason::first_decrease), "first-decrease");
    EXPECT_EQ(to_string(StopReason::frontier_exhausted), "frontier-exhausted");
    EXPECT_EQ(to_string(StopReason::budget_cap), "budget-cap");
}

} // namespace
} // namespace spectree
