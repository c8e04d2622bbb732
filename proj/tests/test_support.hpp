// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

// Independent oracles and fixtures shared by the unit and acceptance suites.
// Nothing here calls into the code path it is used to check.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "emogen/emogen.hpp"

namespace emogen::testing {

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h = 1e-6) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

/// Relative error with an absolute floor for near-zero gradients.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

/// Pearson chi-square goodness-of-fit p-value.
inline double chi_square_p(const std::vector<std::size_t>& observed, const std::vector<double>& probs) {
    double n = 0.0;
    for (auto o : observed) n += static_cast<double>(o);
    double stat = 0.0;
    int df = -1;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        const double e = n * probs[k];
        stat += (observed[k] - e) * (observed[k] - e) / e;
        ++df;
    }
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Codebook with code_dim 1 whose codes decode to flat black (code 0) and
/// flat white (code 1): pixel = 0.5 + 0.5 * v with v = -1 or +1.
inline Codebook black_white_codebook(int patch_size) {
    const auto pv = static_cast<std::size_t>(patch_size) * patch_size * 3;
    return Codebook(2, 1, patch_size, {-1.0, 1.0}, std::vector<double>(pv, 0.5),
                    std::vector<double>(pv, 0.5));
}

/// Code 0 decodes to flat red, code 1 to black.
inline Codebook red_black_codebook(int patch_size) {
    const auto pv = static_cast<std::size_t>(patch_size) * patch_size * 3;
    std::vector<double> w(pv, 0.0);
    for (std::size_t j = 0; j < pv; j += 3) w[j] = 1.0;
    return Codebook(2, 1, patch_size, {1.0, 0.0}, std::move(w), std::vector<double>(pv, 0.0));
}

inline ImageBuffer solid(int h, int w, double r, double g, double b) {
    ImageBuffer img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    return img;
}

inline ImageBuffer random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    ImageBuffer img(h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : img.pixels) v = u(rng);
    return img;
}

/// Reference confusion-matrix rows (percent), intended affect x
/// {Anger, Calmness, Depression, Happiness, Other}.
inline constexpr std::array<std::array<int, 5>, 4> kReferenceConfusion = {{
    {65, 3, 10, 4, 19},
    {2, 62, 15, 8, 13},
    {2, 11, 68, 1, 18},
    {4, 24, 11, 36, 25},
}};

/// Response counts per row that reproduce kReferenceConfusion after integer
/// rounding. The reference Anger row sums to 101%, so no 100-response row
/// matches it; 102 responses (66/3/10/4/19) is the smallest that does.
inline constexpr std::array<std::array<int, 5>, 4> kConfusionCounts = {{
    {66, 3, 10, 4, 19},
    {2, 62, 15, 8, 13},
    {2, 11, 68, 1, 18},
    {4, 24, 11, 36, 25},
}};

inline constexpr std::array<const char*, 8> kFreeformAnswers = {
    "Anxiety", "Disgust", "Fear", "Confusion", "nostalgia", "Awe", "boredom", "surprise"};

/// Responses per intended affect with the kConfusionCounts answer counts
/// (100 per row, 102 for Anger). Responses are spread round-robin over the affect's 8
/// images; each response gets its own participant id.
inline std::vector<SurveyResponse> reference_confusion_fixture() {
    std::vector<SurveyResponse> out;
    int participant = 0;
    for (Affect a : kAffects) {
        const auto& row = kConfusionCounts[static_cast<std::size_t>(a)];
        int slot = 0;
        for (int col = 0; col < 5; ++col) {
            for (int n = 0; n < row[col]; ++n, ++slot) {
                const Genre g = kGenres[static_cast<std::size_t>(slot % 8)];
                SurveyResponse r;
                r.participant_id = "p" + std::to_string(participant++);
                r.image_index = dataset_index(a, g);
                r.answer = EmotionAnswer::parse(col < 4 ? std::string(info(kAffects[col]).name)
                                                        : std::string(kFreeformAnswers[n % 8]));
                r.quality = 1 + (slot % 5);
                r.novelty = 1 + ((slot * 3) % 5);
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

/// 32 images x 4 raters. The first `matched` images get 2 correct answers
/// (exactly half), the rest get 1.
inline std::vector<SurveyResponse> majority_fixture(int matched) {
    std::vector<SurveyResponse> out;
    for (const auto& spec : enumerate_dataset()) {
        const int correct = spec.index < matched ? 2 : 1;
        const Affect wrong = spec.affect == Affect::Anger ? Affect::Calmness : Affect::Anger;
        for (int p = 0; p < 4; ++p) {
            SurveyResponse r;
            r.participant_id = "r" + std::to_string(p);
            r.image_index = spec.index;
            r.answer = EmotionAnswer::parse(
                p < correct ? std::string(info(spec.affect).name)
                            : (p == 3 ? std::string("melancholy") : std::string(info(wrong).name)));
            r.quality = 3;
            r.novelty = 3;
            out.push_back(std::move(r));
        }
    }
    return out;
}

/// Direct covariance-formula Pearson r in long double, single pass over raw sums.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const long double n = static_cast<long double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += static_cast<long double>(x[i]) * x[i];
        syy += static_cast<long double>(y[i]) * y[i];
        sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double cov = sxy / n - (sx / n) * (sy / n);
    const long double vx = sxx / n - (sx / n) * (sx / n);
    const long double vy = syy / n - (sy / n) * (sy / n);
    return static_cast<double>(cov / std::sqrt(vx * vy));
}

}  // namespace emogen::testing
