// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "emogen/scorer.hpp"
#include "test_support.hpp"

using namespace emogen;
using namespace emogen::testing;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::vector<double> random_unit(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    const double s = norm(v);
    for (double& x : v) x /= s;
    return v;
}

// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix (row-major).
std::vector<double> random_orthogonal(std::mt19937_64& rng, int dim) {
    std::vector<std::vector<double>> rows;
    while (static_cast<int>(rows.size()) < dim) {
        auto v = random_unit(rng, dim);
        for (const auto& r : rows) {
            const double d = dot(v, r);
            for (int i = 0; i < dim; ++i) v[i] -= d * r[i];
        }
        const double s = norm(v);
        for (double& x : v) x /= s;
        rows.push_back(v);
    }
    std::vector<double> q;
    for (const auto& r : rows) q.insert(q.end(), r.begin(), r.end());
    return q;
}

std::vector<double> apply(const std::vector<double>& q, const std::vector<double>& v) {
    const std::size_t d = v.size();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i] += q[i * d + j] * v[j];
    return out;
}

class ScoreOnly final : public ScorerBackend {
public:
    std::string name() const override { return "score-only"; }
    int embed_dim() const override { return toy_.embed_dim(); }
    bool differentiable() const override { return false; }
    PromptEmbedding embed_text(std::string_view p) const override { return toy_.embed_text(p); }
    ImageEmbedding embed_image(const ImageBuffer& img) const override { return toy_.embed_image(img); }

private:
    ToyScorer toy_;
};

}  // namespace

TEST(EmbedText, DeterministicAndUnitNorm) {
    ToyScorer s;
    const auto a = s.embed_text("A happy cityscape");
    const auto b = s.embed_text("A happy cityscape");
    EXPECT_EQ(a.vector, b.vector);
    EXPECT_EQ(a.vector.size(), 64u);
    EXPECT_NEAR(norm(a.vector), 1.0, 1e-12);
}

TEST(EmbedText, NormalizesCaseAndWhitespace) {
    ToyScorer s;
    EXPECT_EQ(s.embed_text("A happy cityscape").vector, s.embed_text("a happy  cityscape").vector);
    EXPECT_EQ(s.embed_text("  A\tHAPPY cityscape \n").vector, s.embed_text("a happy cityscape").vector);
    EXPECT_EQ(normalize_prompt("  A\tHAPPY  cityscape \n"), "a happy cityscape");
}

TEST(EmbedText, DistinctPromptsAreNotAligned) {
    ToyScorer s;
    int aligned = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = s.embed_text("prompt " + std::to_string(i));
        const auto b = s.embed_text("prompt " + std::to_string(i) + " variant");
        aligned += dot(a.vector, b.vector) >= 0.99;
    }
    EXPECT_EQ(aligned, 0);
}

TEST(EmbedText, RejectsEmptyPrompt) {
    ToyScorer s;
    EXPECT_THROW(s.embed_text(""), std::invalid_argument);
    EXPECT_THROW(s.embed_text(" \t "), std::invalid_argument);
}

TEST(EmbedImage, IdenticalImagesIdenticalEmbeddings) {
    ToyScorer s;
    const auto img = random_image(32, 32, 4);
    EXPECT_EQ(s.embed_image(img).vector, s.embed_image(img).vector);
}

TEST(EmbedImage, BlackAndWhiteAreDistinct) {
    ToyScorer s;
    // Black features are all -0.5 on the 15 mean terms, white +0.5, variances
    // zero: the projected vectors are exact negatives.
    const auto b = s.embed_image(solid(16, 16, 0, 0, 0));
    const auto w = s.embed_image(solid(16, 16, 1, 1, 1));
    EXPECT_LT(dot(b.vector, w.vector), 1.0 - 1e-3);
    EXPECT_NEAR(dot(b.vector, w.vector), -1.0, 1e-12);
}

TEST(EmbedImage, ZeroFeatureImageStillUnitNorm) {
    ToyScorer s;
    const auto e = s.embed_image(solid(8, 8, 0.5, 0.5, 0.5));
    EXPECT_NEAR(norm(e.vector), 1.0, 1e-12);
    for (double v : e.vector) EXPECT_TRUE(std::isfinite(v));
}

TEST(EmbedImage, TinyImagesWithEmptyQuadrants) {
    ToyScorer s;
    for (auto [h, w] : {std::pair{1, 1}, std::pair{1, 5}, std::pair{3, 1}}) {
        const auto e = s.embed_image(random_image(h, w, 3));
        EXPECT_NEAR(norm(e.vector), 1.0, 1e-12);
    }
}

TEST(EmbedImage, NoNonFiniteOutputOnValidImages) {
    ToyScorer s;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        ImageBuffer img = random_image(1 + trial % 9, 1 + (trial * 7) % 11, trial);
        if (trial % 4 == 0)
            for (double& v : img.pixels) v = std::round(v);  // saturated extremes
        const auto e = s.embed_image(img);
        for (double v : e.vector) ASSERT_TRUE(std::isfinite(v));
        const auto g = s.loss_gradient(img, s.embed_text("x"));
        for (double v : g.grad_pixels) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(EmbedImage, JacobianMatchesFiniteDifferences) {
    ToyScorer s;
    const auto img = random_image(6, 5, 17, 0.1, 0.9);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> coord(0, s.embed_dim() - 1);
    for (int trial = 0; trial < 12; ++trial) {
        const int i = coord(rng);
        std::vector<double> seed(s.embed_dim(), 0.0);
        seed[i] = 1.0;
        const auto grad = s.embed_image_vjp(img, seed);
        auto f = [&](const std::vector<double>& px) {
            ImageBuffer m = img;
            m.pixels = px;
            return s.embed_image(m).vector[i];
        };
        for (std::size_t p = 0; p < img.pixels.size(); ++p) {
            const double numeric = central_difference(f, img.pixels, p);
            EXPECT_LT(relative_error(grad[p], numeric), 1e-4) << "coord " << i << " pixel " << p;
        }
    }
}

TEST(EmbedImage, LossGradientMatchesFiniteDifferences) {
    ToyScorer s;
    const auto img = random_image(8, 8, 5, 0.05, 0.95);
    const auto pe = s.embed_text("An angry landscape");
    const auto lg = s.loss_gradient(img, pe);
    EXPECT_DOUBLE_EQ(lg.loss, similarity_loss(s.embed_image(img), pe));
    auto f = [&](const std::vector<double>& px) {
        ImageBuffer m = img;
        m.pixels = px;
        return similarity_loss(s.embed_image(m), pe);
    };
    for (std::size_t p = 0; p < img.pixels.size(); p += 3) {
        EXPECT_LT(relative_error(lg.grad_pixels[p], central_difference(f, img.pixels, p)), 1e-4);
    }
}

TEST(EmbedImage, AugmentationHookIsApplied) {
    ImageAugmentation flip;
    flip.forward = [](const ImageBuffer& in) {
        ImageBuffer out = in;
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x)
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = in.at(y, in.width - 1 - x, c);
        return out;
    };
    flip.backward = [](const ImageBuffer& in, std::span<const double> g) {
        std::vector<double> out(g.size());
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x)
                for (int c = 0; c < 3; ++c)
                    out[in.index(y, x, c)] = g[in.index(y, in.width - 1 - x, c)];
        return out;
    };
    ToyScorer plain;
    ToyScorer flipped(64, 0x5eed, flip);
    const auto img = random_image(6, 6, 8, 0.1, 0.9);
    const auto mirrored = flip.forward(img);
    EXPECT_EQ(flipped.embed_image(img).vector, plain.embed_image(mirrored).vector);

    const auto pe = plain.embed_text("A calm landscape");
    const auto g = flipped.loss_gradient(img, pe);
    auto f = [&](const std::vector<double>& px) {
        ImageBuffer m = img;
        m.pixels = px;
        return similarity_loss(flipped.embed_image(m), pe);
    };
    for (std::size_t p = 0; p < img.pixels.size(); p += 5)
        EXPECT_LT(relative_error(g.grad_pixels[p], central_difference(f, img.pixels, p)), 1e-4);
}

TEST(SimilarityLoss, ReferenceValues) {
    std::vector<double> e0{1, 0, 0}, e1{0, 1, 0}, neg{-1, 0, 0};
    EXPECT_DOUBLE_EQ(similarity_loss(e0, e0), 0.0);
    EXPECT_DOUBLE_EQ(similarity_loss(e0, neg), 2.0);
    EXPECT_DOUBLE_EQ(similarity_loss(e0, e1), 1.0);
}

TEST(SimilarityLoss, RejectsNonUnitOrMismatched) {
    std::vector<double> a{1, 0}, b{2, 0}, c{1, 0, 0};
    EXPECT_THROW(similarity_loss(a, b), std::invalid_argument);
    EXPECT_THROW(similarity_loss(a, c), std::invalid_argument);
}

TEST(SimilarityLoss, SymmetricAndRotationInvariant) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 2 + trial % 20;
        const auto a = random_unit(rng, dim);
        const auto b = random_unit(rng, dim);
        const double l = similarity_loss(a, b);
        EXPECT_NEAR(l, similarity_loss(b, a), 1e-15);
        const auto q = random_orthogonal(rng, dim);
        EXPECT_NEAR(l, similarity_loss(apply(q, a), apply(q, b)), 1e-6);
    }
}

TEST(Backend, NonDifferentiableAdapterRefusesGradients) {
    ScoreOnly s;
    EXPECT_FALSE(s.differentiable());
    const auto img = random_image(4, 4, 1);
    EXPECT_NO_THROW(s.embed_image(img));
    EXPECT_THROW(s.loss_gradient(img, s.embed_text("x")), UnsupportedOperation);
}

TEST(Backend, RegistryResolvesByName) {
    BackendRegistry reg;
    EXPECT_TRUE(reg.contains("toy"));
    EXPECT_EQ(reg.make("toy")->name(), "toy");
    EXPECT_TRUE(reg.make("toy")->differentiable());
    EXPECT_THROW(reg.make("clip-vit-b32"), std::invalid_argument);
    std::filesystem::path seen;
    reg.add("score-only", [&](const std::filesystem::path& ckpt) {
        seen = ckpt;
        return std::make_shared<const ScoreOnly>();
    });
    EXPECT_EQ(reg.make("score-only", "/models/x.bin")->name(), "score-only");
    EXPECT_EQ(seen, "/models/x.bin");
}
