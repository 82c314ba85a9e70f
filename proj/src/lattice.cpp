// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spectree {

MarginalBlock::MarginalBlock(std::size_t gamma, std::size_t vocab_size, std::vector<double> probs)
    : gamma_(gamma), vocab_size_(vocab_size), probs_(std::move(probs)) {
    if (gamma_ < 1) {
        throw std::invalid_argument("MarginalBlock: gamma must be >= 1");
    }
    if (vocab_size_ < 2) {
        throw std::invalid_argument("MarginalBlock: vocab_size must be >= 2");
    }
    if (probs_.size() != gamma_ * vocab_size_) {
        throw std::invalid_argument("MarginalBlock: expected " + std::to_string(gamma_ * vocab_size_) +
                                    " probabilities, got " + std::to_string(probs_.size()));
    }
    for (std::size_t k = 0; k < gamma_; ++k) {
        double sum = 0.0;
        for (std::size_t v = 0; v < vocab_size_; ++v) {
            double p = probs_[k * vocab_size_ + v];
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument("MarginalBlock: probability out of [0,1] at row " + std::to_string(k));
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            std::ostringstream msg;
            msg << "MarginalBlock: row " << k << " sums to " << std::setprecision(17) << sum;
            throw std::invalid_argument(msg.str());
        }
    }
}

MarginalBlock MarginalBlock::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        throw std::invalid_argument("MarginalBlock: no rows");
    }
    std::size_t v = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * v);
    for (const auto& r : rows) {
        if (r.size() != v) {
            throw std::invalid_argument("MarginalBlock: ragged rows");
        }
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return MarginalBlock(rows.size(), v, std::move(flat));
}

std::span<const double> MarginalBlock::row(std::size_t position) const {
    if (position >= gamma_) {
        throw std::out_of_range("MarginalBlock::row: position out of range");
    }
    return {probs_.data() + position * vocab_size_, vocab_size_};
}

double MarginalBlock::prob(std::size_t position, Token token) const {
    if (token < 0 || static_cast<std::size_t>(token) >= vocab_size_) {
        throw std::out_of_range("MarginalBlock::prob: token out of range");
    }
    return row(position)[static_cast<std::size_t>(token)];
}

Token MarginalBlock::argmax(std::size_t position) const {
    auto r = row(position);
    // max_element keeps the first maximum, i.e. the smallest token id on ties.
    return static_cast<Token>(std::max_element(r.begin(), r.end()) - r.begin());
}

CandidateLattice::CandidateLattice(std::shared_ptr<const MarginalBlock> source, std::size_t top_k,
                                   std::vector<LatticeEntry> entries)
    : source_(std::move(source)), top_k_(top_k), entries_(std::move(entries)) {
    if (!source_) {
        throw std::invalid_argument("CandidateLattice: null source block");
    }
    gamma_ = source_->gamma();
    if (top_k_ < 1 || top_k_ > source_->vocab_size()) {
        throw std::invalid_argument("CandidateLattice: top_k out of range");
    }
    if (entries_.size() != gamma_ * top_k_) {
        throw std::invalid_argument("CandidateLattice: entry table has wrong size");
    }
}

const MarginalBlock& CandidateLattice::source() const {
    if (!source_) {
        throw std::logic_error("CandidateLattice::source: empty lattice");
    }
    return *source_;
}

std::span<const LatticeEntry> CandidateLattice::entries(std::size_t position) const {
    if (position >= gamma_) {
        throw std::out_of_range("CandidateLattice::entries: position out of range");
    }
    return {entries_.data() + position * top_k_, top_k_};
}

std::size_t CandidateLattice::reachable_size() const noexcept {
    constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
    std::size_t total = 0;
    std::size_t level = 1;
    for (std::size_t d = 0; d < gamma_; ++d) {
        if (level > kMax / top_k_) {
            return kMax;
        }
        level *= top_k_;
        if (total > kMax - level) {
            return kMax;
        }
        total += level;
    }
    return total;
}

CandidateLattice top_k_truncate(std::shared_ptr<const MarginalBlock> block, std::size_t k) {
    if (!block) {
        throw std::invalid_argument("top_k_truncate: null block");
    }
    if (k < 1 || k > block->vocab_size()) {
        throw std::invalid_argument("top_k_truncate: k=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(block->vocab_size()) + "]");
    }
    std::vector<LatticeEntry> entries;
    entries.reserve(block->gamma() * k);
    std::vector<Token> order(block->vocab_size());
    for (std::size_t pos = 0; pos < block->gamma(); ++pos) {
        auto row = block->row(pos);
        std::iota(order.begin(), order.end(), Token{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](Token a, Token b) {
                              double pa = row[static_cast<std::size_t>(a)];
                              double pb = row[static_cast<std::size_t>(b)];
                              return pa != pb ? pa > pb : a < b;
                          });
        for (std::size_t r = 0; r < k; ++r) {
            entries.push_back({order[r], row[static_cast<std::size_t>(order[r])]});
        }
    }
    return CandidateLattice(std::move(block), k, std::move(entries));
}

CandidateLattice top_k_truncate(const MarginalBlock& block, std::size_t k) {
    return top_k_truncate(std::make_shared<const MarginalBlock>(block), k);
}

CandidateLattice top_k_truncate(const CandidateLattice& lattice, std::size_t k) {
    if (lattice.empty()) {
        throw std::invalid_argument("top_k_truncate: empty lattice");
    }
    if (k < 1 || k > lattice.top_k()) {
        throw std::invalid_argument("top_k_truncate: k must be in [1, lattice.top_k()]");
    }
    std::vector<LatticeEntry> entries;
    entries.reserve(lattice.gamma() * k);
    for (std::size_t pos = 0; pos < lattice.gamma(); ++pos) {
        auto row = lattice.entries(pos);
        entries.insert(entries.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return CandidateLattice(lattice.source_ptr(), k, std::move(entries));
}

std::vector<Token> sample_continuation(const MarginalBlock& block, RandomStream& rng) {
    std::vector<Token> out(block.gamma());
    for (std::size_t k = 0; k < block.gamma(); ++k) {
        auto row = block.row(k);
        double u = uniform01(rng);
        double acc = 0.0;
        Token chosen = kNoToken;
        for (std::size_t v = 0; v < row.size(); ++v) {
            if (row[v] <= 0.0) {
                continue;
            }
            chosen = static_cast<Token>(v);
            acc += row[v];
            if (u < acc) {
                break;
            }
        }
        // Rounding can leave acc a hair under 1; the last positive token absorbs it.
        out[k] = chosen;
    }
    return out;
}

void write_block(std::ostream& out, const MarginalBlock& block) {
    out << block.gamma() << ' ' << block.vocab_size() << '\n';
    out << std::setprecision(17);
    for (std::size_t k = 0; k < block.gamma(); ++k) {
        auto row = block.row(k);
        for (std::size_t v = 0; v < row.size(); ++v) {
            out << (v ? " " : "") << row[v];
        }
        out << '\n';
    }
}

MarginalBlock read_block(std::istream& in) {
    std::size_t gamma = 0;
    std::size_t vocab = 0;
    if (!(in >> gamma >> vocab)) {
        throw std::runtime_error("read_block: missing 'gamma vocab_size' header");
    }
    if (gamma == 0 || vocab == 0 || gamma > (std::size_t{1} << 20) / vocab) {
        throw std::runtime_error("read_block: implausible block shape");
    }
    std::vector<double> probs(gamma * vocab);
    for (double& p : probs) {
        if (!(in >> p)) {
            throw std::runtime_error("read_block: truncated probability table");
        }
    }
    return MarginalBlock(gamma, vocab, std::move(probs));
}

void SyntheticPairConfig::validate() const {
    if (gamma < 1) {
        throw std::invalid_argument("SyntheticPairConfig: gamma must be >= 1");
    }
    if (vocab_size < 2) {
        throw std::invalid_argument("SyntheticPairConfig: vocab_size must be >= 2");
    }
    if (!(alignment >= 0.0 && alignment <= 1.0)) {
        throw std::invalid_argument("SyntheticPairConfig: alignment must lie in [0,1]");
    }
    if (!(concentration > 0.0)) {
        throw std::invalid_argument("SyntheticPairConfig: concentration must be > 0");
    }
}

namespace {

constexpr std::uint64_t kDifficultySalt = 0xd1ff1c017eULL;
constexpr int kMeanGrid = 4096;

double rank_slope(double concentration, double z) { return concentration * (0.25 + 1.5 * z); }

// Geometric rank distribution p_r ∝ exp(-slope * r), r = 0..V-1.
void rank_probabilities(double slope, std::vector<double>& p) {
    if (std::isinf(slope)) {
        std::fill(p.begin(), p.end(), 0.0);
        p[0] = 1.0;
        return;
    }
    double sum = 0.0;
    for (std::size_t r = 0; r < p.size(); ++r) {
        p[r] = std::exp(-slope * static_cast<double>(r));
        sum += p[r];
    }
    for (double& x : p) {
        x /= sum;
    }
}

} // namespace

SyntheticPair::SyntheticPair(SyntheticPairConfig cfg, TargetMode mode)
    : cfg_((cfg.validate(), cfg)), target_(cfg.vocab_size, mix(cfg.seed, 0x7a26e7ULL), mode), mean_top_(0.0) {
    double acc = 0.0;
    for (int i = 0; i < kMeanGrid; ++i) {
        acc += top_probability((i + 0.5) / kMeanGrid);
    }
    mean_top_ = acc / kMeanGrid;
}

double SyntheticPair::top_probability(double z) const {
    double slope = rank_slope(cfg_.concentration, z);
    if (std::isinf(slope)) {
        return 1.0;
    }
    double v = static_cast<double>(cfg_.vocab_size);
    return -std::expm1(-slope) / -std::expm1(-slope * v);
}

double SyntheticPair::agreement_probability(double top) const {
    double a = cfg_.alignment;
    double m = mean_top_;
    if (a >= m) {
        double lambda = m >= 1.0 ? 1.0 : (a - m) / (1.0 - m);
        return top + lambda * (1.0 - top);
    }
    return top * a / m;
}

MarginalBlock SyntheticPair::draft(ContextHash context) const {
    const std::size_t gamma = cfg_.gamma;
    const std::size_t vocab = cfg_.vocab_size;

    std::vector<Token> truth(gamma);
    ContextHash h = context;
    for (std::size_t k = 0; k < gamma; ++k) {
        truth[k] = target_.greedy_token(h);
        h = h.extended(truth[k]);
    }

    const std::uint64_t cycle_key = mix(mix(cfg_.seed, kDifficultySalt), context.value());
    const double z = to_unit(mix(cycle_key, 0));
    std::vector<double> by_rank(vocab);
    rank_probabilities(rank_slope(cfg_.concentration, z), by_rank);
    const double agree_p = agreement_probability(by_rank[0]);
    const double tail_mass = 1.0 - by_rank[0];

    std::vector<double> probs(gamma * vocab);
    std::vector<Token> others(vocab - 1);
    for (std::size_t k = 0; k < gamma; ++k) {
        RandomStream rng(mix(cycle_key, k + 1));
        std::size_t target_rank = 0;
        if (!(uniform01(rng) < agree_p)) {
            if (tail_mass > 0.0) {
                double u = uniform01(rng) * tail_mass;
                double acc = 0.0;
                target_rank = vocab - 1;
                for (std::size_t r = 1; r < vocab; ++r) {
                    acc += by_rank[r];
                    if (u < acc) {
                        target_rank = r;
                        break;
                    }
                }
            } else {
                target_rank = 1 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(vocab - 1));
                target_rank = std::min(target_rank, vocab - 1);
            }
        }

        std::size_t n = 0;
        for (std::size_t v = 0; v < vocab; ++v) {
            if (static_cast<Token>(v) != truth[k]) {
                others[n++] = static_cast<Token>(v);
            }
        }
        for (std::size_t i = others.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
            std::swap(others[i - 1], others[std::min(j, i - 1)]);
        }

        double* row = probs.data() + k * vocab;
        row[static_cast<std::size_t>(truth[k])] = by_rank[target_rank];
        std::size_t next = 0;
        for (std::size_t r = 0; r < vocab; ++r) {
            if (r == target_rank) {
                continue;
            }
            row[static_cast<std::size_t>(others[next++])] = by_rank[r];
        }
    }
    return MarginalBlock(gamma, vocab, std::move(probs));
}

GeneratedPair generate_synthetic_pair(const SyntheticPairConfig& cfg) {
    SyntheticPair pair(cfg);
    return {pair.draft(ContextHash{}), pair.target()};
}

} // namespace spectree
