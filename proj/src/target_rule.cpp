// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/target_rule.hpp"

#include <cmath>
#include <stdexcept>

namespace spectree {

namespace {
constexpr std::uint64_t kGreedySalt = 0x7a1e5c0ffee01ULL;
constexpr std::uint64_t kSampleSalt = 0x5a3b1e0dd5eedULL;
} // namespace

TargetRule::TargetRule(std::size_t vocab_size, std::uint64_t seed, TargetMode mode, double peak_logit)
    : vocab_size_(vocab_size), seed_(seed), mode_(mode), peak_logit_(peak_logit) {
    if (vocab_size < 2) {
        throw std::invalid_argument("TargetRule: vocab_size must be >= 2");
    }
    if (!std::isfinite(peak_logit)) {
        throw std::invalid_argument("TargetRule: peak_logit must be finite");
    }
}

Token TargetRule::greedy_token(ContextHash context) const noexcept {
    std::uint64_t bits = mix(mix(seed_, kGreedySalt), context.value());
    return static_cast<Token>(to_unit(bits) * static_cast<double>(vocab_size_));
}

std::vector<double> TargetRule::distribution(ContextHash context, double temperature) const {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("TargetRule::distribution: temperature must be > 0");
    }
    // Softmax over logits {peak, 0, ..., 0}.
    double peak = std::exp(peak_logit_ / temperature);
    double z = peak + static_cast<double>(vocab_size_ - 1);
    std::vector<double> p(vocab_size_, 1.0 / z);
    p[static_cast<std::size_t>(greedy_token(context))] = peak / z;
    return p;
}

Token TargetRule::choose(ContextHash context, double temperature) const {
    if (temperature < 0.0) {
        throw std::invalid_argument("TargetRule::choose: negative temperature");
    }
    if (mode_ == TargetMode::greedy_aligned || temperature == 0.0) {
        return greedy_token(context);
    }
    Token greedy = greedy_token(context);
    double peak = std::exp(peak_logit_ / temperature);
    double z = peak + static_cast<double>(vocab_size_ - 1);
    double u = to_unit(mix(mix(seed_, kSampleSalt), context.value())) * z;
    if (u < peak) {
        return greedy;
    }
    // Remaining mass is uniform over the other V-1 tokens.
    auto k = static_cast<std::size_t>(u - peak);
    if (k >= vocab_size_ - 1) {
        k = vocab_size_ - 2;
    }
    auto t = static_cast<Token>(k);
    return t >= greedy ? t + 1 : t;
}

} // namespace spectree
