// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spectree {

double mean(std::span<const double> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("mean: empty input");
    }
    double s = 0.0;
    for (double x : xs) {
        s += x;
    }
    return s / static_cast<double>(xs.size());
}

double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m) * (x - m);
    }
    double n = static_cast<double>(xs.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("pearson: need two equally long columns of >= 2 values");
    }
    double mx = mean(x);
    double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw std::invalid_argument("correlation undefined: a column is constant");
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) {
            ++j;
        }
        double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("spearman: columns differ in length");
    }
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

PairedTest paired_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("paired_test: need two equally long samples of >= 2 values");
    }
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    PairedTest out;
    out.n = d.size();
    out.mean_diff = mean(d);
    out.std_err = standard_error(d);
    if (out.std_err == 0.0) {
        out.t = out.mean_diff > 0.0 ? INFINITY : (out.mean_diff < 0.0 ? -INFINITY : 0.0);
        out.p_greater = out.mean_diff > 0.0 ? 0.0 : (out.mean_diff < 0.0 ? 1.0 : 0.5);
        return out;
    }
    out.t = out.mean_diff / out.std_err;
    out.p_greater = 0.5 * std::erfc(out.t / std::sqrt(2.0));
    return out;
}

} // namespace spectree
