// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spectree {

double mean(std::span<const double> xs);
/// Sample standard deviation over sqrt(n); 0 for n < 2.
double standard_error(std::span<const double> xs);

/// Throws std::invalid_argument on mismatched or short (< 2) inputs and on a
/// zero-variance column, where the coefficient is undefined.
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson on average ranks (tied values share the mean of their ranks).
double spearman(std::span<const double> x, std::span<const double> y);
/// 1-based ranks with ties averaged.
std::vector<double> average_ranks(std::span<const double> xs);

struct PairedTest {
    std::size_t n = 0;
    double mean_diff = 0.0;
    double std_err = 0.0;
    double t = 0.0;
    /// P(mean diff this large | no difference), one-sided, normal approximation.
    double p_greater = 1.0;
};

/// Paired test of mean(a - b) > 0. Needs >= 2 pairs.
PairedTest paired_test(std::span<const double> a, std::span<const double> b);

} // namespace spectree
