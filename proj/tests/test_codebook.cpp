// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "emogen/codebook.hpp"
#include "test_support.hpp"

using namespace emogen;
using namespace emogen::testing;

TEST(InitLogitGrid, DeterministicUnderSeed) {
    const auto a = init_logit_grid(2, 2, 4, 1.0, 7);
    const auto b = init_logit_grid(2, 2, 4, 1.0, 7);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.logits.size(), 16u);
    EXPECT_NE(a.logits, init_logit_grid(2, 2, 4, 1.0, 8).logits);
}

TEST(InitLogitGrid, TinyStdGivesUniformSoftmax) {
    const auto pg = softmax_grid(init_logit_grid(2, 2, 4, 1e-12, 3));
    for (double p : pg.probs) EXPECT_NEAR(p, 0.25, 1e-9);
}

TEST(InitLogitGrid, MomentsAtDefaultScale) {
    const auto lg = init_logit_grid(16, 16, 1024, 1.0, 0);
    ASSERT_EQ(lg.logits.size(), 262144u);
    double sum = 0.0, ss = 0.0;
    for (double v : lg.logits) sum += v;
    const double mean = sum / lg.logits.size();
    for (double v : lg.logits) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (lg.logits.size() - 1));
    // The standard error of the mean is 1/512, of the sd about 1/724; the
    // +-0.01 / +-0.02 windows are > 5 sigma.
    EXPECT_LT(std::abs(mean), 0.01);
    EXPECT_LT(std::abs(sd - 1.0), 0.02);
}

TEST(InitLogitGrid, RejectsBadArguments) {
    EXPECT_THROW(init_logit_grid(0, 2, 4, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(init_logit_grid(2, -1, 4, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(init_logit_grid(2, 2, 0, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(init_logit_grid(2, 2, 4, 0.0, 0), std::invalid_argument);
    EXPECT_THROW(init_logit_grid(2, 2, 4, -1.0, 0), std::invalid_argument);
}

static LogitGrid single_cell(std::vector<double> logits) {
    const int k = static_cast<int>(logits.size());
    return LogitGrid{{1, 1, k}, std::move(logits)};
}

TEST(SoftmaxGrid, AnalyticCells) {
    auto pg = softmax_grid(single_cell({0, 0, 0, 0}));
    for (double p : pg.probs) EXPECT_DOUBLE_EQ(p, 0.25);
    pg = softmax_grid(single_cell({std::log(2.0), 0.0}));
    EXPECT_NEAR(pg.probs[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(pg.probs[1], 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxGrid, LargeLogitMatchesHighPrecisionOracle) {
    using big = boost::multiprecision::cpp_bin_float_50;
    const auto pg = softmax_grid(single_cell({1000.0, 0.0}));
    const big e = boost::multiprecision::exp(big(-1000));
    const big p1 = e / (1 + e);
    const big p0 = 1 / (1 + e);
    EXPECT_TRUE(std::isfinite(pg.probs[0]));
    EXPECT_EQ(pg.probs[0], static_cast<double>(p0));
    // exp(-1000) underflows double to 0; the oracle's value is below the
    // smallest subnormal as well.
    EXPECT_EQ(pg.probs[1], static_cast<double>(p1));
}

TEST(SoftmaxGrid, RejectsNonFinite) {
    EXPECT_THROW(softmax_grid(single_cell({0.0, NAN})), std::invalid_argument);
    EXPECT_THROW(softmax_grid(single_cell({INFINITY, 0.0})), std::invalid_argument);
}

TEST(SoftmaxGrid, CellsSumToOneForWideLogits) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> mag(-1000.0, 1000.0);
    for (int trial = 0; trial < 200; ++trial) {
        auto lg = init_logit_grid(3, 2, 1 + trial % 17, 1.0, trial);
        for (double& v : lg.logits) v = mag(rng) * (trial % 3 == 0 ? 1.0 : 0.01);
        const auto pg = softmax_grid(lg);
        for (std::size_t i = 0; i < pg.shape.cells(); ++i) {
            double s = 0.0;
            for (double p : pg.cell(i)) {
                EXPECT_GE(p, 0.0);
                EXPECT_LE(p, 1.0);
                s += p;
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(SampleCodes, DegenerateCellAlwaysPicksMass) {
    ProbGrid pg{{1, 1, 3}, {1.0, 0.0, 0.0}};
    for (std::uint64_t s = 0; s < 500; ++s) EXPECT_EQ(sample_codes(pg, s).codes[0], 0);
    ProbGrid last{{1, 1, 3}, {0.0, 0.0, 1.0}};
    for (std::uint64_t s = 0; s < 500; ++s) EXPECT_EQ(sample_codes(last, s).codes[0], 2);
}

TEST(SampleCodes, FairCoinFrequency) {
    ProbGrid pg{{1, 100000, 2}, {}};
    pg.probs.assign(200000, 0.5);
    const auto cg = sample_codes(pg, 2024);
    std::size_t zeros = 0;
    for (int c : cg.codes) zeros += c == 0;
    const double f = zeros / 100000.0;
    // binomial sd = 0.0016; window is > 6 sd
    EXPECT_GE(f, 0.49);
    EXPECT_LE(f, 0.51);
}

TEST(SampleCodes, DeterministicUnderSeed) {
    const auto pg = softmax_grid(init_logit_grid(8, 8, 16, 1.0, 1));
    EXPECT_EQ(sample_codes(pg, 99), sample_codes(pg, 99));
}

TEST(SampleCodes, ChiSquareGoodnessOfFit) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> p(4);
        double total = 0.0;
        for (double& v : p) total += v = u(rng);
        for (double& v : p) v /= total;
        ProbGrid pg{{1, 100000, 4}, {}};
        for (int i = 0; i < 100000; ++i) pg.probs.insert(pg.probs.end(), p.begin(), p.end());
        const auto cg = sample_codes(pg, 77 + trial);
        std::vector<std::size_t> counts(4, 0);
        for (int c : cg.codes) ++counts[c];
        EXPECT_GT(chi_square_p(counts, p), 0.01) << "trial " << trial;
    }
}

TEST(SampleCodes, RejectsInvalidGrid) {
    ProbGrid bad{{1, 1, 2}, {0.7, 0.7}};
    EXPECT_THROW(sample_codes(bad, 0), std::invalid_argument);
}

TEST(ArgmaxCodes, PicksMaximumAndBreaksTiesLow) {
    EXPECT_EQ(argmax_codes(single_cell({0.1, 5.0, -2.0})).codes[0], 1);
    EXPECT_EQ(argmax_codes(single_cell({3.0, 3.0, 1.0})).codes[0], 0);
    EXPECT_EQ(argmax_codes(single_cell({-1.0, 2.0, 2.0})).codes[0], 1);
}

TEST(ArgmaxCodes, MatchesSamplingMode) {
    const auto lg = init_logit_grid(2, 3, 5, 1.5, 42);
    const auto pg = softmax_grid(lg);
    const auto am = argmax_codes(lg);
    std::vector<std::vector<int>> freq(lg.shape.cells(), std::vector<int>(5, 0));
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const auto cg = sample_codes(pg, s);
        for (std::size_t i = 0; i < cg.codes.size(); ++i) ++freq[i][cg.codes[i]];
    }
    for (std::size_t i = 0; i < freq.size(); ++i) {
        const int mode = static_cast<int>(std::max_element(freq[i].begin(), freq[i].end()) - freq[i].begin());
        EXPECT_EQ(mode, am.codes[i]) << "cell " << i;
    }
}

TEST(ArgmaxCodes, InvariantUnderPerCellShift) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto lg = init_logit_grid(3, 3, 7, 1.0, trial);
        const auto before = argmax_codes(lg);
        for (std::size_t i = 0; i < lg.shape.cells(); ++i) {
            const double c = shift(rng);
            for (double& v : lg.cell(i)) v += c;
        }
        // A shift can merge nearly tied logits through rounding; only compare
        // cells whose top-two gap is well above double precision at this scale.
        const auto after = argmax_codes(lg);
        for (std::size_t i = 0; i < lg.shape.cells(); ++i) {
            auto v = lg.cell(i);
            std::vector<double> sorted(v.begin(), v.end());
            std::sort(sorted.rbegin(), sorted.rend());
            if (sorted[0] - sorted[1] > 1e-9) {
                EXPECT_EQ(before.codes[i], after.codes[i]);
            }
        }
    }
}

TEST(DecodeHard, SinglePatchSolidRed) {
    const auto cb = red_black_codebook(16);
    const auto img = decode_hard(CodeGrid{1, 1, {0}}, cb);
    ASSERT_EQ(img.height, 16);
    ASSERT_EQ(img.width, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            EXPECT_EQ(img.at(y, x, 0), 1.0);
            EXPECT_EQ(img.at(y, x, 1), 0.0);
            EXPECT_EQ(img.at(y, x, 2), 0.0);
        }
}

TEST(DecodeHard, CheckerboardFixture) {
    const auto cb = black_white_codebook(4);
    const CodeGrid cg{3, 3, {0, 1, 0, 1, 0, 1, 0, 1, 0}};
    const auto img = decode_hard(cg, cb);
    ASSERT_EQ(img.height, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(img.at(y, x, c), ((y / 4 + x / 4) % 2) ? 1.0 : 0.0);
}

TEST(DecodeHard, RejectsOutOfRangeIndex) {
    const auto cb = black_white_codebook(2);
    EXPECT_THROW(decode_hard(CodeGrid{1, 1, {2}}, cb), std::invalid_argument);
    EXPECT_THROW(decode_hard(CodeGrid{1, 1, {-1}}, cb), std::invalid_argument);
}

TEST(DecodeSoft, OneHotEqualsHardExactly) {
    const auto cb = Codebook::toy(32, 8, 8, 3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto lg = init_logit_grid(4, 5, 32, 2.0, trial);
        const auto codes = argmax_codes(lg);
        EXPECT_EQ(decode_hard(codes, cb), decode_soft(one_hot(codes, 32), cb));
    }
}

TEST(DecodeSoft, UniformBlackWhiteIsMidGray) {
    const auto cb = black_white_codebook(4);
    ProbGrid pg{{1, 1, 2}, {0.5, 0.5}};
    const auto img = decode_soft(pg, cb);
    for (double v : img.pixels) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(DecodeSoft, PixelsStayInUnitRange) {
    const auto cb = Codebook::toy(64, 16, 8, 9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto lg = init_logit_grid(3, 3, 64, 5.0, trial);
        for (const auto& img : {decode_soft(softmax_grid(lg), cb), decode_hard(argmax_codes(lg), cb)})
            for (double v : img.pixels) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
    }
}

TEST(DecodeSoft, PixelGradientMatchesFiniteDifferences) {
    const auto cb = Codebook::toy(4, 6, 4, 21);
    const auto lg0 = init_logit_grid(2, 2, 4, 1.0, 13);
    const auto pg = softmax_grid(lg0);
    const auto img = decode_soft(pg, cb);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pick_pixel(0, img.pixels.size() - 1);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t pix = pick_pixel(rng);
        if (img.pixels[pix] < 1e-3 || img.pixels[pix] > 1.0 - 1e-3) continue;  // clamp kink
        std::vector<double> seed(img.pixels.size(), 0.0);
        seed[pix] = 1.0;
        const auto grad = softmax_backward(pg, decode_soft_backward(pg, cb, seed));
        auto f = [&](const std::vector<double>& logits) {
            return decode_soft(softmax_grid(LogitGrid{lg0.shape, logits}), cb).pixels[pix];
        };
        for (std::size_t k = 0; k < lg0.logits.size(); ++k) {
            const double numeric = central_difference(f, lg0.logits, k);
            EXPECT_LT(relative_error(grad[k], numeric), 1e-4) << "pixel " << pix << " logit " << k;
        }
        ++checked;
    }
    EXPECT_GT(checked, 30);
}

TEST(Codebook, ValidatesConstruction) {
    EXPECT_THROW(Codebook(1, 1, 1, {0.0}, {0, 0, 0}, {0, 0, 0}), std::invalid_argument);
    EXPECT_THROW(Codebook(2, 1, 1, {0.0, NAN}, {0, 0, 0}, {0, 0, 0}), std::invalid_argument);
    EXPECT_THROW(Codebook(2, 1, 1, {0.0}, {0, 0, 0}, {0, 0, 0}), std::invalid_argument);
    EXPECT_THROW(Codebook(2, 1, 0, {0.0, 1.0}, {}, {}), std::invalid_argument);
    EXPECT_NO_THROW(Codebook(2, 1, 1, {0.0, 1.0}, {0, 0, 0}, {0, 0, 0}));
}

TEST(Codebook, ToyIsReproducible) {
    const auto a = Codebook::toy(16, 4, 4, 5);
    const auto b = Codebook::toy(16, 4, 4, 5);
    EXPECT_TRUE(std::equal(a.codes().begin(), a.codes().end(), b.codes().begin()));
    EXPECT_TRUE(std::equal(a.decode_weights().begin(), a.decode_weights().end(),
                           b.decode_weights().begin()));
}
