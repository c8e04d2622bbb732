// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "emogen/codebook.hpp"
#include "emogen/csv.hpp"

namespace emogen {

/// 12 hue bins centred on 0, 30, ..., 330 degrees, then white, black, gray.
inline constexpr int kPaletteBins = 15;
inline constexpr int kWhiteBin = 12;
inline constexpr int kBlackBin = 13;
inline constexpr int kGrayBin = 14;

inline constexpr std::array<std::string_view, kPaletteBins> kPaletteBinNames = {
    "red",  "orange",  "yellow", "chartreuse", "green", "spring_green", "cyan", "azure",
    "blue", "violet", "magenta", "rose",       "white", "black",        "gray",
};

struct PaletteThresholds {
    double saturation = 0.15;  // below: monochrome
    double white_value = 0.85; // monochrome and value >= this: white
    double black_value = 0.15; // monochrome and value <= this: black
};

inline int quantize_pixel(double r, double g, double b, const PaletteThresholds& t = {}) {
    for (double v : {r, g, b})
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("quantize_pixel: channel outside [0, 1]");
    const double hi = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    const double delta = hi - lo;
    const double sat = hi > 0.0 ? delta / hi : 0.0;
    if (sat < t.saturation) {
        if (hi >= t.white_value) return kWhiteBin;
        if (hi <= t.black_value) return kBlackBin;
        return kGrayBin;
    }
    double hue;
    if (hi == r)
        hue = 60.0 * std::fmod((g - b) / delta + 6.0, 6.0);
    else if (hi == g)
        hue = 60.0 * ((b - r) / delta + 2.0);
    else
        hue = 60.0 * ((r - g) / delta + 4.0);
    const int bin = static_cast<int>(std::floor(std::fmod(hue + 15.0, 360.0) / 30.0));
    return std::clamp(bin, 0, 11);
}

struct PaletteProfile {
    std::string image_id;
    std::array<double, kPaletteBins> ratios{};
};

/// Summary features derived from a 15-bin ratio vector.
struct PaletteFeatures {
    double monochrome = 0.0;  // white + black + gray
    double warm = 0.0;        // red + orange + magenta
    double blue = 0.0;
    double green = 0.0;
};

inline PaletteFeatures derived_features(const std::array<double, kPaletteBins>& r) {
    return {r[kWhiteBin] + r[kBlackBin] + r[kGrayBin], r[0] + r[1] + r[10], r[8], r[4]};
}

inline constexpr std::array<std::string_view, 4> kDerivedFeatureNames = {"monochrome", "warm",
                                                                         "blue", "green"};

inline std::array<double, 4> as_array(const PaletteFeatures& f) {
    return {f.monochrome, f.warm, f.blue, f.green};
}

inline PaletteProfile palette_profile(const ImageBuffer& img, std::string image_id = {},
                                      const PaletteThresholds& t = {}) {
    const std::size_t n = static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.width);
    if (n == 0 || img.pixels.size() != n * 3)
        throw std::invalid_argument("palette_profile: invalid image buffer");
    std::array<std::size_t, kPaletteBins> counts{};
    for (std::size_t i = 0; i < n; ++i)
        ++counts[quantize_pixel(img.pixels[i * 3], img.pixels[i * 3 + 1], img.pixels[i * 3 + 2], t)];
    PaletteProfile p;
    p.image_id = std::move(image_id);
    for (int b = 0; b < kPaletteBins; ++b)
        p.ratios[b] = static_cast<double>(counts[b]) / static_cast<double>(n);
    return p;
}

struct GroupPalette {
    std::string group;
    std::size_t count = 0;
    std::array<double, kPaletteBins> mean{};
    PaletteFeatures features;
};

/// Per-group mean ratios. `keys[i]` names the group of `profiles[i]`. Groups
/// are reported in `groups` order; when `groups` is empty, every key seen is
/// reported in sorted order. A listed group without members is an error.
inline std::vector<GroupPalette> aggregate_profiles(std::span<const PaletteProfile> profiles,
                                                    std::span<const std::string> keys,
                                                    std::vector<std::string> groups = {}) {
    if (profiles.size() != keys.size())
        throw std::invalid_argument("aggregate_profiles: one group key per profile required");
    if (groups.empty()) {
        groups.assign(keys.begin(), keys.end());
        std::sort(groups.begin(), groups.end());
        groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    }
    if (groups.empty()) throw std::invalid_argument("aggregate_profiles: no profiles");
    std::vector<GroupPalette> out;
    for (const auto& g : groups) {
        GroupPalette gp;
        gp.group = g;
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            if (keys[i] != g) continue;
            ++gp.count;
            for (int b = 0; b < kPaletteBins; ++b) gp.mean[b] += profiles[i].ratios[b];
        }
        if (gp.count == 0) throw std::invalid_argument("aggregate_profiles: group '" + g + "' is empty");
        for (double& m : gp.mean) m /= static_cast<double>(gp.count);
        gp.features = derived_features(gp.mean);
        out.push_back(std::move(gp));
    }
    return out;
}

struct CorrelationReport {
    std::string feature;
    double r = 0.0;
    std::size_t n = 0;
    double p_value = 1.0;  // two-sided
    bool significant = false;
};

/// Pearson r with a two-sided t-test (n - 2 degrees of freedom).
inline CorrelationReport correlate_feature_ratings(std::span<const double> feature,
                                                   std::span<const double> ratings,
                                                   std::string name = {}, double alpha = 0.05) {
    if (feature.size() != ratings.size())
        throw std::invalid_argument("correlate: feature and rating lists differ in length");
    const std::size_t n = feature.size();
    if (n < 3) throw std::invalid_argument("correlate: at least 3 pairs required");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += feature[i];
        my += ratings[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = feature[i] - mx;
        const double dy = ratings[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::domain_error("correlate: correlation undefined for zero-variance input");

    CorrelationReport rep;
    rep.feature = std::move(name);
    rep.n = n;
    rep.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(n - 2);
    if (std::abs(rep.r) == 1.0) {
        rep.p_value = 0.0;
    } else if (df > 0.0) {
        const double t = rep.r * std::sqrt(df / (1.0 - rep.r * rep.r));
        boost::math::students_t dist(df);
        rep.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))),
                                 0.0, 1.0);
    }
    rep.significant = rep.p_value < alpha;
    return rep;
}

inline std::string palette_csv_header() {
    std::vector<std::string> cols{"image_id"};
    for (auto n : kPaletteBinNames) cols.emplace_back(n);
    for (auto n : kDerivedFeatureNames) cols.emplace_back(n);
    return csv::join(cols);
}

/// image_id, 15 bin ratios, 4 derived features.
inline void write_palette_csv(std::ostream& os, std::span<const PaletteProfile> profiles) {
    os << palette_csv_header() << '\n';
    for (const auto& p : profiles) {
        std::vector<std::string> row{p.image_id};
        for (double v : p.ratios) row.push_back(csv::number(v));
        for (double v : as_array(derived_features(p.ratios))) row.push_back(csv::number(v));
        os << csv::join(row) << '\n';
    }
}

}  // namespace emogen
