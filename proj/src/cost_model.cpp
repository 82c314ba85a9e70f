// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/cost_model.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace spectree {

void CostModelParams::validate() const {
    if (layers <= 0 || hidden <= 0 || q_heads <= 0 || kv_heads <= 0 || head_dim <= 0 || ffn_hidden <= 0 ||
        vocab <= 0 || bytes_per_element <= 0) {
        throw std::invalid_argument("CostModelParams: all model dimensions must be positive");
    }
    if (!(peak_flops > 0.0) || !(bandwidth > 0.0)) {
        throw std::invalid_argument("CostModelParams: peak_flops and bandwidth must be positive");
    }
}

namespace {
void check_query(const LatencyQuery& q) {
    if (q.s < 1 || q.c < 0) {
        throw std::invalid_argument("LatencyQuery: need s >= 1 and c >= 0");
    }
}
} // namespace

// All operands are integers well below 2^53, so every product and sum below
// is exact in double precision.
double flops(const CostModelParams& p, const LatencyQuery& q) {
    check_query(q);
    const double s = static_cast<double>(q.s);
    const double c = static_cast<double>(q.c);
    const double h = static_cast<double>(p.hidden);
    const double hq = static_cast<double>(p.q_width());
    const double hkv = static_cast<double>(p.kv_width());
    const double hffn = static_cast<double>(p.ffn_hidden);
    const double layer = 4 * s * h * hq + 4 * s * h * hkv + 4 * s * (c + s) * hq + 6 * s * h * hffn;
    return static_cast<double>(p.layers) * layer + 2 * s * h * static_cast<double>(p.vocab);
}

double bytes(const CostModelParams& p, const LatencyQuery& q) {
    check_query(q);
    const double s = static_cast<double>(q.s);
    const double c = static_cast<double>(q.c);
    const double h = static_cast<double>(p.hidden);
    const double hq = static_cast<double>(p.q_width());
    const double hkv = static_cast<double>(p.kv_width());
    const double hffn = static_cast<double>(p.ffn_hidden);
    const double nq = static_cast<double>(p.q_heads);
    const double v = static_cast<double>(p.vocab);
    const double layer = 2 * h * (hq + hkv) + 3 * h * hffn + 2 * hkv * (c + 2 * s) + 4 * s * (h + hq + hffn) +
                         2 * nq * s * (c + s);
    return static_cast<double>(p.bytes_per_element) *
           (2 * v * h + s * (h + v) + static_cast<double>(p.layers) * layer);
}

ByteBreakdown byte_breakdown(const CostModelParams& p, const LatencyQuery& q) {
    check_query(q);
    const double s = static_cast<double>(q.s);
    const double c = static_cast<double>(q.c);
    const double h = static_cast<double>(p.hidden);
    const double hq = static_cast<double>(p.q_width());
    const double hkv = static_cast<double>(p.kv_width());
    const double hffn = static_cast<double>(p.ffn_hidden);
    const double nq = static_cast<double>(p.q_heads);
    const double v = static_cast<double>(p.vocab);
    const double L = static_cast<double>(p.layers);
    const double bp = static_cast<double>(p.bytes_per_element);

    ByteBreakdown b;
    // embedding + LM head, then attention and FFN weights per layer
    b.weights = bp * (L * (2 * h * hq + 2 * h * hkv + 3 * h * hffn) + (v * h + h * v));
    // past-context read + new-token write per layer
    b.kv_cache = bp * (L * (2 * c * hkv + 2 * s * hkv));
    const double attn_io = 2 * s * h + 4 * s * hq + 2 * s * hkv + 2 * nq * s * (c + s);
    const double ffn_io = 2 * s * h + 4 * s * hffn;
    b.activations = bp * (L * (attn_io + ffn_io) + (s * h + s * v));
    return b;
}

double roofline_latency(const CostModelParams& params, const LatencyQuery& q) {
    return std::max(flops(params, q) / params.peak_flops, bytes(params, q) / params.bandwidth);
}

double CalibrationFit::rmse_reduction() const noexcept {
    if (!(rmse_before > 0.0)) {
        return 0.0;
    }
    return 1.0 - rmse_after / rmse_before;
}

CalibrationFit fit_static_calibration(std::span<const LatencyPair> pairs) {
    if (pairs.size() < 2) {
        throw std::invalid_argument("fit_static_calibration: need at least 2 (predicted, observed) pairs");
    }
    const double n = static_cast<double>(pairs.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : pairs) {
        mx += p.predicted;
        my += p.observed;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : pairs) {
        sxx += (p.predicted - mx) * (p.predicted - mx);
        sxy += (p.predicted - mx) * (p.observed - my);
    }
    if (!(sxx > 0.0)) {
        throw std::invalid_argument("fit_static_calibration: all predicted values are equal");
    }
    CalibrationFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double before = 0.0;
    double after = 0.0;
    for (const auto& p : pairs) {
        before += (p.observed - p.predicted) * (p.observed - p.predicted);
        double r = p.observed - fit.apply(p.predicted);
        after += r * r;
    }
    fit.rmse_before = std::sqrt(before / n);
    fit.rmse_after = std::sqrt(after / n);
    return fit;
}

EmaBias ema_update(const EmaBias& bias, double predicted, double observed) {
    if (!(predicted > 0.0) || !(observed > 0.0)) {
        throw std::invalid_argument("ema_update: predicted and observed must be positive");
    }
    if (!(bias.alpha > 0.0 && bias.alpha <= 1.0)) {
        throw std::invalid_argument("ema_update: alpha must lie in (0,1]");
    }
    EmaBias next = bias;
    next.ratio_bias = (1.0 - bias.alpha) * bias.ratio_bias + bias.alpha * (observed / predicted);
    return next;
}

std::string to_string(EstimatorVariant v) {
    switch (v) {
    case EstimatorVariant::static_calib:
        return "static";
    case EstimatorVariant::ema:
        return "ema";
    case EstimatorVariant::ema_calib:
        return "ema+calib";
    }
    return "?";
}

EstimatorVariant parse_variant(const std::string& name) {
    if (name == "static") return EstimatorVariant::static_calib;
    if (name == "ema") return EstimatorVariant::ema;
    if (name == "ema+calib" || name == "ema_calib") return EstimatorVariant::ema_calib;
    throw std::invalid_argument("unknown estimator variant '" + name + "' (expected static, ema, ema+calib)");
}

double estimate_verify_latency(EstimatorVariant variant, const CostModelParams& params, const LatencyQuery& q,
                               const std::optional<CalibrationFit>& fit, const std::optional<EmaBias>& bias) {
    const bool needs_fit = variant != EstimatorVariant::ema;
    const bool needs_bias = variant != EstimatorVariant::static_calib;
    if (needs_fit && !fit) {
        throw std::invalid_argument("estimate_verify_latency: " + to_string(variant) + " needs a calibration fit");
    }
    if (needs_bias && !bias) {
        throw std::invalid_argument("estimate_verify_latency: " + to_string(variant) + " needs an EMA bias");
    }
    double raw = roofline_latency(params, q);
    switch (variant) {
    case EstimatorVariant::static_calib:
        return fit->apply(raw);
    case EstimatorVariant::ema:
        return bias->ratio_bias * raw;
    case EstimatorVariant::ema_calib:
        return bias->ratio_bias * fit->apply(raw);
    }
    return raw;
}

LatencyEstimator::LatencyEstimator(EstimatorVariant variant, CostModelParams params,
                                   std::optional<CalibrationFit> fit, std::optional<EmaBias> bias)
    : variant_(variant), params_(params), fit_(fit), bias_(bias) {
    params_.validate();
    if (variant_ != EstimatorVariant::ema && !fit_) {
        throw std::invalid_argument("LatencyEstimator: " + to_string(variant_) + " needs a calibration fit");
    }
    if (variant_ != EstimatorVariant::static_calib && !bias_) {
        bias_ = EmaBias{};
    }
    if (fit_ && !(fit_->slope > 0.0)) {
        throw std::invalid_argument("LatencyEstimator: calibration slope must be positive");
    }
}

double LatencyEstimator::estimate(const LatencyQuery& q) const {
    return estimate_verify_latency(variant_, params_, q, fit_, bias_);
}

void LatencyEstimator::observe(const LatencyQuery& q, double observed_seconds) {
    if (variant_ == EstimatorVariant::static_calib) {
        return;
    }
    double raw = roofline_latency(params_, q);
    double base = variant_ == EstimatorVariant::ema_calib ? fit_->apply(raw) : raw;
    bias_ = ema_update(*bias_, base, observed_seconds);
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw std::invalid_argument("profile: value for '" + key + "' is not a number: '" + text + "'");
    }
    return v;
}

std::int64_t as_dimension(const std::string& key, double v) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) {
        throw std::invalid_argument("profile: '" + key + "' must be a positive integer");
    }
    return static_cast<std::int64_t>(v);
}

} // namespace

CostModelParams parse_cost_params(std::istream& in, std::map<std::string, double>* extra) {
    std::map<std::string, double> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("profile: line " + std::to_string(lineno) + " is not 'key = value'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (kv.count(key)) {
            throw std::invalid_argument("profile: duplicate key '" + key + "'");
        }
        kv[key] = parse_number(key, value);
    }

    CostModelParams p;
    auto take = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw std::invalid_argument(std::string("profile: missing key '") + key + "'");
        }
        double v = it->second;
        kv.erase(it);
        return v;
    };
    p.layers = as_dimension("L", take("L"));
    p.hidden = as_dimension("h", take("h"));
    p.q_heads = as_dimension("n_q", take("n_q"));
    p.kv_heads = as_dimension("n_kv", take("n_kv"));
    p.head_dim = as_dimension("d", take("d"));
    p.ffn_hidden = as_dimension("h_ffn", take("h_ffn"));
    p.vocab = as_dimension("V", take("V"));
    p.bytes_per_element = as_dimension("bp", take("bp"));
    p.peak_flops = take("peak_flops");
    p.bandwidth = take("bandwidth");
    p.validate();

    if (!kv.empty()) {
        if (!extra) {
            throw std::invalid_argument("profile: unknown key '" + kv.begin()->first + "'");
        }
        *extra = std::move(kv);
    }
    return p;
}

std::vector<TraceRow> read_latency_trace(std::istream& in) {
    std::vector<TraceRow> rows;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cols.push_back(trim(cell));
        }
        if (first && !cols.empty() && !cols[0].empty() && !(std::isdigit(static_cast<unsigned char>(cols[0][0])))) {
            first = false;
            continue; // header
        }
        first = false;
        if (cols.size() != 3) {
            throw std::invalid_argument("trace: line " + std::to_string(lineno) + " must have 3 columns s,c,observed");
        }
        TraceRow r;
        r.s = as_dimension("s", parse_number("s", cols[0]));
        double c = parse_number("c", cols[1]);
        if (c < 0 || c != std::floor(c)) {
            throw std::invalid_argument("trace: c must be a non-negative integer on line " + std::to_string(lineno));
        }
        r.c = static_cast<std::int64_t>(c);
        r.observed = parse_number("observed_seconds", cols[2]);
        if (!(r.observed > 0.0)) {
            throw std::invalid_argument("trace: observed latency must be positive on line " + std::to_string(lineno));
        }
        rows.push_back(r);
    }
    return rows;
}

void write_latency_trace(std::ostream& out, std::span<const TraceRow> rows) {
    out << "s,c,observed_seconds\n" << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.s << ',' << r.c << ',' << r.observed << '\n';
    }
}

std::vector<LatencyPair> predict_trace(const CostModelParams& params, std::span<const TraceRow> rows) {
    std::vector<LatencyPair> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back({roofline_latency(params, {r.s, r.c}), r.observed});
    }
    return out;
}

} // namespace spectree
