// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Roofline latency predictor for one verification forward pass of a dense
 * decoder-only transformer, plus the calibration layers that correct it.
 *
 * Counts assume unfused attention, 2 FLOPs per multiply-accumulate, and ignore
 * elementwise ops (norms, rotary, softmax, activation). Byte traffic is split
 * into weights, KV cache and activations; embedding and LM head are counted
 * separately even when tied.
 *
 * Estimator variants:
 *   Static    slope * roofline + intercept      (offline least-squares fit)
 *   EMA       bias * roofline                   (online ratio tracking)
 *   EMA+Calib bias * (slope * roofline + intercept)
 */

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spectree {

struct CostModelParams {
    std::int64_t layers = 0;     // L
    std::int64_t hidden = 0;     // h
    std::int64_t q_heads = 0;    // n_q
    std::int64_t kv_heads = 0;   // n_kv
    std::int64_t head_dim = 0;   // d
    std::int64_t ffn_hidden = 0; // h_ffn
    std::int64_t vocab = 0;      // V
    std::int64_t bytes_per_element = 0; // bp
    double peak_flops = 0.0;     // ops / s
    double bandwidth = 0.0;      // bytes / s

    std::int64_t q_width() const noexcept { return q_heads * head_dim; }
    std::int64_t kv_width() const noexcept { return kv_heads * head_dim; }

    /// Throws std::invalid_argument on any non-positive field.
    void validate() const;
};

/// s: tokens verified in the pass, c: tokens already in the KV cache.
struct LatencyQuery {
    std::int64_t s = 1;
    std::int64_t c = 0;
};

double flops(const CostModelParams& params, const LatencyQuery& q);
double bytes(const CostModelParams& params, const LatencyQuery& q);

struct ByteBreakdown {
    double weights = 0.0;
    double kv_cache = 0.0;
    double activations = 0.0;
    double total() const noexcept { return weights + kv_cache + activations; }
};

/// Per-category traffic; total() equals bytes() for every input.
ByteBreakdown byte_breakdown(const CostModelParams& params, const LatencyQuery& q);

/// max(flops / peak_flops, bytes / bandwidth), in seconds.
double roofline_latency(const CostModelParams& params, const LatencyQuery& q);

struct LatencyPair {
    double predicted = 0.0;
    double observed = 0.0;
};

struct CalibrationFit {
    double slope = 1.0;
    double intercept = 0.0;
    double rmse_before = 0.0;
    double rmse_after = 0.0;

    double apply(double predicted) const noexcept { return slope * predicted + intercept; }
    /// Fractional RMSE reduction in [0,1]; 0 when rmse_before is 0.
    double rmse_reduction() const noexcept;
};

/// Ordinary least squares of observed on predicted. Needs >= 2 pairs and at
/// least two distinct predicted values.
CalibrationFit fit_static_calibration(std::span<const LatencyPair> pairs);

struct EmaBias {
    double ratio_bias = 1.0;
    double alpha = 0.1;
};

/// Returns (1 - alpha) * bias + alpha * observed / predicted.
EmaBias ema_update(const EmaBias& bias, double predicted, double observed);

enum class EstimatorVariant { static_calib, ema, ema_calib };

std::string to_string(EstimatorVariant v);
EstimatorVariant parse_variant(const std::string& name);

double estimate_verify_latency(EstimatorVariant variant, const CostModelParams& params, const LatencyQuery& q,
                               const std::optional<CalibrationFit>& fit, const std::optional<EmaBias>& bias);

/// Cost-model handle owned by one decoding stream. observe() folds a measured
/// verification latency into the EMA bias for the EMA variants.
class LatencyEstimator {
  public:
    LatencyEstimator(EstimatorVariant variant, CostModelParams params, std::optional<CalibrationFit> fit,
                     std::optional<EmaBias> bias);

    EstimatorVariant variant() const noexcept { return variant_; }
    const CostModelParams& params() const noexcept { return params_; }
    const std::optional<CalibrationFit>& fit() const noexcept { return fit_; }
    const std::optional<EmaBias>& bias() const noexcept { return bias_; }

    double estimate(const LatencyQuery& q) const;
    void observe(const LatencyQuery& q, double observed_seconds);

  private:
    EstimatorVariant variant_;
    CostModelParams params_;
    std::optional<CalibrationFit> fit_;
    std::optional<EmaBias> bias_;
};

/// Parses "key = value" lines (blank lines and '#' comments ignored). Keys
/// L, h, n_q, n_kv, d, h_ffn, V, bp, peak_flops and bandwidth are required.
/// Any other keys are returned through `extra` if given, else rejected.
CostModelParams parse_cost_params(std::istream& in, std::map<std::string, double>* extra = nullptr);

struct TraceRow {
    std::int64_t s = 1;
    std::int64_t c = 0;
    double observed = 0.0;
};

/// Reads "s,c,observed_seconds" rows; an optional header line is skipped.
std::vector<TraceRow> read_latency_trace(std::istream& in);
void write_latency_trace(std::ostream& out, std::span<const TraceRow> rows);

/// Pairs each trace row with its roofline prediction.
std::vector<LatencyPair> predict_trace(const CostModelParams& params, std::span<const TraceRow> rows);

} // namespace spectree
