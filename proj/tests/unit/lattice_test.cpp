// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/lattice.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spectree/oracle_check.hpp"
#include "spectree/verify_sim.hpp"

namespace spectree {
namespace {

TEST(MarginalBlock, RejectsInvalidShapesAndRows) {
    EXPECT_THROW(MarginalBlock(0, 2, {}), std::invalid_argument);
    EXPECT_THROW(MarginalBlock(1, 1, {1.0}), std::invalid_argument);
    EXPECT_THROW(MarginalBlock(1, 2, {0.5, 0.6}), std::invalid_argument);
    EXPECT_THROW(MarginalBlock(1, 2, {1.5, -0.5}), std::invalid_argument);
    EXPECT_THROW(MarginalBlock(2, 2, {0.5, 0.5}), std::invalid_argument);
    EXPECT_NO_THROW(MarginalBlock(1, 2, {0.5, 0.5 + 5e-10}));
}

TEST(TopK, KeepsLargestEntries) {
    CandidateLattice lat = top_k_truncate(MarginalBlock(1, 3, {0.5, 0.3, 0.2}), 2);
    ASSERT_EQ(lat.entries(0).size(), 2u);
    EXPECT_EQ(lat.entry(0, 0), (LatticeEntry{0, 0.5}));
    EXPECT_EQ(lat.entry(0, 1), (LatticeEntry{1, 0.3}));
}

TEST(TopK, TiesGoToLowerToken) {
    CandidateLattice lat = top_k_truncate(MarginalBlock(1, 3, {0.4, 0.4, 0.2}), 1);
    EXPECT_EQ(lat.entry(0, 0), (LatticeEntry{0, 0.4}));
}

TEST(TopK, SortsEachRowIndependently) {
    CandidateLattice lat = top_k_truncate(
        MarginalBlock::from_rows({{0.1, 0.2, 0.3, 0.4}, {0.25, 0.25, 0.25, 0.25}}), 2);
    EXPECT_EQ(lat.entry(0, 0), (LatticeEntry{3, 0.4}));
    EXPECT_EQ(lat.entry(0, 1), (LatticeEntry{2, 0.3}));
    EXPECT_EQ(lat.entry(1, 0), (LatticeEntry{0, 0.25}));
    EXPECT_EQ(lat.entry(1, 1), (LatticeEntry{1, 0.25}));
}

TEST(TopK, RejectsOutOfRangeK) {
    MarginalBlock b(1, 3, {0.5, 0.3, 0.2});
    EXPECT_THROW(top_k_truncate(b, 0), std::invalid_argument);
    EXPECT_THROW(top_k_truncate(b, 4), std::invalid_argument);
}

TEST(TopK, LeavesSourceUnchanged) {
    MarginalBlock b = MarginalBlock::from_rows({{0.1, 0.2, 0.3, 0.4}});
    MarginalBlock copy = b;
    (void)top_k_truncate(b, 2);
    EXPECT_EQ(b, copy);
}

TEST(TopK, RetruncationMatchesDirectTruncation) {
    RandomStream rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        MarginalBlock b = random_block(rng, 1 + trial % 5, 2 + trial % 17);
        for (std::size_t k = 1; k <= b.vocab_size(); ++k) {
            CandidateLattice wide = top_k_truncate(b, k);
            for (std::size_t k2 = 1; k2 <= k; ++k2) {
                CandidateLattice a = top_k_truncate(wide, k2);
                CandidateLattice d = top_k_truncate(b, k2);
                for (std::size_t pos = 0; pos < b.gamma(); ++pos) {
                    ASSERT_TRUE(std::ranges::equal(a.entries(pos), d.entries(pos)));
                }
            }
        }
    }
}

TEST(TopK, IdenticalInputsGiveIdenticalLattices) {
    std::vector<double> row(64, 1.0 / 64.0);
    MarginalBlock b(2, 64, [&] {
        std::vector<double> p(row);
        p.insert(p.end(), row.begin(), row.end());
        return p;
    }());
    CandidateLattice x = top_k_truncate(b, 8);
    CandidateLattice y = top_k_truncate(b, 8);
    for (std::size_t pos = 0; pos < 2; ++pos) {
        EXPECT_TRUE(std::ranges::equal(x.entries(pos), y.entries(pos)));
        for (std::size_t r = 0; r < 8; ++r) {
            EXPECT_EQ(x.entry(pos, r).token, static_cast<Token>(r));
        }
    }
}

TEST(TopK, ReachableSizeSumsLevelWidths) {
    RandomStream rng(3);
    CandidateLattice lat = top_k_truncate(random_block(rng, 3, 5), 2);
    EXPECT_EQ(lat.reachable_size(), 2u + 4u + 8u);
}

TEST(SampleContinuation, OneHotRowIsCertain) {
    MarginalBlock b = MarginalBlock::from_rows({{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}});
    RandomStream rng(5);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_continuation(b, rng), (std::vector<Token>{1, 2, 0}));
    }
}

TEST(SampleContinuation, LengthIsGamma) {
    RandomStream rng(6);
    MarginalBlock b = random_block(rng, 3, 7);
    EXPECT_EQ(sample_continuation(b, rng).size(), 3u);
}

TEST(SampleContinuation, FrequencyWithinBinomialBound) {
    MarginalBlock b(1, 2, {0.7, 0.3});
    RandomStream rng(7);
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        zeros += sample_continuation(b, rng)[0] == 0;
    }
    // 3 sigma of a Binomial(1e5, 0.7) proportion is 0.0043.
    EXPECT_NEAR(static_cast<double>(zeros) / n, 0.7, 0.005);
}

TEST(SampleContinuation, EmpiricalFrequenciesConverge) {
    RandomStream rng(8);
    int runs = 0;
    int good = 0;
    for (int run = 0; run < 200; ++run) {
        MarginalBlock b = random_block(rng, 2, 6);
        const int n = 2000;
        std::vector<std::vector<int>> counts(2, std::vector<int>(6, 0));
        for (int i = 0; i < n; ++i) {
            auto x = sample_continuation(b, rng);
            counts[0][static_cast<std::size_t>(x[0])]++;
            counts[1][static_cast<std::size_t>(x[1])]++;
        }
        bool ok = true;
        for (std::size_t k = 0; k < 2; ++k) {
            for (std::size_t v = 0; v < 6; ++v) {
                double q = b.prob(k, static_cast<Token>(v));
                double f = static_cast<double>(counts[k][v]) / n;
                ok = ok && std::abs(f - q) <= 4.0 * std::sqrt(q * (1.0 - q) / n) + 1e-12;
            }
        }
        ++runs;
        good += ok;
    }
    EXPECT_GE(good * 100, runs * 99);
}

TEST(BlockText, RoundTripsExactly) {
    RandomStream rng(9);
    MarginalBlock b = random_block(rng, 3, 11);
    std::stringstream ss;
    write_block(ss, b);
    EXPECT_EQ(read_block(ss), b);
}

TEST(BlockText, RejectsMalformedInput) {
    std::stringstream bad("2 3\n0.5 0.5 0\n");
    EXPECT_THROW(read_block(bad), std::runtime_error);
}

std::vector<Token> target_chain(const SyntheticPair& pair, ContextHash ctx) {
    std::vector<Token> out;
    for (std::size_t k = 0; k < pair.config().gamma; ++k) {
        Token t = pair.target().greedy_token(ctx);
        out.push_back(t);
        ctx = ctx.extended(t);
    }
    return out;
}

TEST(SyntheticPair, PerfectAlignmentMatchesArgmaxEverywhere) {
    SyntheticPairConfig cfg;
    cfg.alignment = 1.0;
    cfg.seed = 17;
    GeneratedPair g = generate_synthetic_pair(cfg);
    SyntheticPair pair(cfg);
    auto truth = target_chain(pair, ContextHash{});
    for (std::size_t k = 0; k < cfg.gamma; ++k) {
        EXPECT_EQ(g.drafter.argmax(k), truth[k]) << "position " << k;
    }
    for (Token c = 0; c < 50; ++c) {
        ContextHash ctx = ContextHash{}.extended(c);
        MarginalBlock b = pair.draft(ctx);
        auto t = target_chain(pair, ctx);
        for (std::size_t k = 0; k < cfg.gamma; ++k) {
            ASSERT_EQ(b.argmax(k), t[k]);
        }
    }
}

TEST(SyntheticPair, AgreementFrequencyTracksAlignment) {
    for (std::size_t vocab : {2u, 64u}) {
        for (double a : {0.0, 0.5, 0.8}) {
            SyntheticPairConfig cfg;
            cfg.vocab_size = vocab;
            cfg.gamma = 4;
            cfg.alignment = a;
            cfg.seed = 23;
            SyntheticPair pair(cfg);
            const int n = 10000;
            int agree = 0;
            for (int i = 0; i < n; ++i) {
                ContextHash ctx = ContextHash{}.extended(i).extended(i / 7);
                agree += pair.draft(ctx).argmax(0) == pair.target().greedy_token(ctx);
            }
            double f = static_cast<double>(agree) / n;
            double sigma = std::sqrt(std::max(a * (1.0 - a), 1e-4) / n);
            EXPECT_NEAR(f, a, 4.0 * sigma) << "V=" << vocab << " alignment=" << a;
        }
    }
}

TEST(SyntheticPair, ZeroAlignmentNeverAgrees) {
    SyntheticPairConfig cfg;
    cfg.vocab_size = 2;
    cfg.alignment = 0.0;
    SyntheticPair pair(cfg);
    for (Token i = 0; i < 2000; ++i) {
        ContextHash ctx = ContextHash{}.extended(i);
        ASSERT_NE(pair.draft(ctx).argmax(0), pair.target().greedy_token(ctx));
    }
}

TEST(SyntheticPair, SameSeedIsBitIdentical) {
    SyntheticPairConfig cfg;
    cfg.seed = 99;
    GeneratedPair a = generate_synthetic_pair(cfg);
    GeneratedPair b = generate_synthetic_pair(cfg);
    EXPECT_EQ(a.drafter, b.drafter);
    cfg.seed = 100;
    EXPECT_NE(generate_synthetic_pair(cfg).drafter, a.drafter);
}

TEST(SyntheticPair, RowsAreDistributions) {
    SyntheticPairConfig cfg;
    SyntheticPair pair(cfg);
    for (Token c = 0; c < 20; ++c) {
        MarginalBlock b = pair.draft(ContextHash{}.extended(c));
        for (std::size_t k = 0; k < b.gamma(); ++k) {
            double s = 0.0;
            for (double p : b.row(k)) {
                ASSERT_GE(p, 0.0);
                s += p;
            }
            ASSERT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(SyntheticPair, InfiniteConcentrationGivesOneHotRows) {
    SyntheticPairConfig cfg;
    cfg.concentration = std::numeric_limits<double>::infinity();
    cfg.alignment = 1.0;
    SyntheticPair pair(cfg);
    MarginalBlock b = pair.draft(ContextHash{});
    for (std::size_t k = 0; k < b.gamma(); ++k) {
        EXPECT_EQ(b.prob(k, b.argmax(k)), 1.0);
    }
}

TEST(SyntheticPair, ValidatesConfig) {
    SyntheticPairConfig cfg;
    cfg.alignment = 1.5;
    EXPECT_THROW(SyntheticPair{cfg}, std::invalid_argument);
    cfg.alignment = 0.5;
    cfg.concentration = 0.0;
    EXPECT_THROW(SyntheticPair{cfg}, std::invalid_argument);
}

} // namespace
} // namespace spectree
