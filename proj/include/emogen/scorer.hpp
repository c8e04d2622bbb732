// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emogen/codebook.hpp"
#include "emogen/errors.hpp"
#include "emogen/rng.hpp"

namespace emogen {

/// Unit-norm text embedding.
struct PromptEmbedding {
    std::vector<double> vector;
};

/// Unit-norm image embedding.
struct ImageEmbedding {
    std::vector<double> vector;
};

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_pixels;  // same layout as ImageBuffer::pixels
};

/// 1 - cos(ie, pe), in [0, 2]. Both inputs must be unit vectors of equal size.
inline double similarity_loss(std::span<const double> ie, std::span<const double> pe) {
    if (ie.size() != pe.size() || ie.empty())
        throw std::invalid_argument("similarity_loss: embedding dimensions differ");
    double dot = 0.0, ni = 0.0, np = 0.0;
    for (std::size_t i = 0; i < ie.size(); ++i) {
        dot += ie[i] * pe[i];
        ni += ie[i] * ie[i];
        np += pe[i] * pe[i];
    }
    if (std::abs(std::sqrt(ni) - 1.0) > 1e-6 || std::abs(std::sqrt(np) - 1.0) > 1e-6)
        throw std::invalid_argument("similarity_loss: embeddings must be unit norm");
    return std::clamp(1.0 - dot, 0.0, 2.0);
}

inline double similarity_loss(const ImageEmbedding& ie, const PromptEmbedding& pe) {
    return similarity_loss(ie.vector, pe.vector);
}

/// Lowercases ASCII, trims, and collapses internal whitespace runs to one space.
inline std::string normalize_prompt(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(ch)));
    }
    return out;
}

/// Text/image embedding backend.
///
/// Backends are immutable once built. A differentiable backend must override
/// loss_gradient; the others can only score finished images.
class ScorerBackend {
public:
    virtual ~ScorerBackend() = default;

    virtual std::string name() const = 0;
    virtual int embed_dim() const = 0;
    virtual bool differentiable() const = 0;

    virtual PromptEmbedding embed_text(std::string_view prompt) const = 0;
    virtual ImageEmbedding embed_image(const ImageBuffer& img) const = 0;

    /// similarity_loss(embed_image(img), pe) and its gradient w.r.t. pixels.
    virtual LossGradient loss_gradient(const ImageBuffer& img, const PromptEmbedding& pe) const {
        (void)img;
        (void)pe;
        throw UnsupportedOperation("scorer backend '" + name() + "' does not expose gradients");
    }
};

/// Optional differentiable image transform applied before embedding.
struct ImageAugmentation {
    std::function<ImageBuffer(const ImageBuffer&)> forward;
    /// Maps d/d(augmented pixels) back to d/d(input pixels).
    std::function<std::vector<double>(const ImageBuffer& input, std::span<const double> grad_out)>
        backward;
};

/// Built-in differentiable scorer that needs no external weights.
///
/// Text: a pseudo-random unit vector seeded by a hash of the normalized prompt.
/// Image: 18 hand-built features (per-quadrant mean RGB minus 0.5, global mean
/// RGB minus 0.5, 4x global variance per channel) pushed through a fixed seeded
/// E x 18 linear map and L2-normalized. Quadrants split rows and columns at
/// ceil(n / 2); an empty quadrant (1-pixel-wide image) contributes zeros.
class ToyScorer final : public ScorerBackend {
public:
    static constexpr int kFeatures = 18;
    /// Added to the first coordinate when the projected feature vector has
    /// norm below this value, so normalization stays defined.
    static constexpr double kZeroNormEpsilon = 1e-12;

    explicit ToyScorer(int embed_dim = 64, std::uint64_t seed = 0x5eed,
                       std::optional<ImageAugmentation> augmentation = std::nullopt)
        : dim_(embed_dim), seed_(seed), augmentation_(std::move(augmentation)) {
        if (embed_dim < 2) throw std::invalid_argument("toy scorer: embed_dim must be >= 2");
        Rng rng(derive_seed(seed, 0x1a9e));
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(kFeatures)));
        projection_.resize(static_cast<std::size_t>(dim_) * kFeatures);
        for (double& v : projection_) v = normal(rng);
    }

    std::string name() const override { return "toy"; }
    int embed_dim() const override { return dim_; }
    bool differentiable() const override { return true; }

    PromptEmbedding embed_text(std::string_view prompt) const override {
        const std::string norm = normalize_prompt(prompt);
        if (norm.empty()) throw std::invalid_argument("embed_text: empty prompt");
        Rng rng(derive_seed(seed_, fnv1a64(norm)));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> v(static_cast<std::size_t>(dim_));
        double n2 = 0.0;
        for (double& x : v) {
            x = normal(rng);
            n2 += x * x;
        }
        const double n = std::sqrt(n2);
        for (double& x : v) x /= n;
        return {std::move(v)};
    }

    ImageEmbedding embed_image(const ImageBuffer& img) const override {
        return {forward(img).embedding};
    }

    LossGradient loss_gradient(const ImageBuffer& img, const PromptEmbedding& pe) const override {
        if (pe.vector.size() != static_cast<std::size_t>(dim_))
            throw std::invalid_argument("loss_gradient: prompt embedding has wrong dimension");
        const Forward f = forward(img);
        LossGradient out;
        out.loss = similarity_loss(f.embedding, pe.vector);
        std::vector<double> g(pe.vector.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = -pe.vector[i];
        out.grad_pixels = backward(img, f, g);
        return out;
    }

    /// d(sum_i grad_embedding[i] * embedding[i]) / d(pixels).
    std::vector<double> embed_image_vjp(const ImageBuffer& img,
                                        std::span<const double> grad_embedding) const {
        if (grad_embedding.size() != static_cast<std::size_t>(dim_))
            throw std::invalid_argument("embed_image_vjp: gradient has wrong dimension");
        return backward(img, forward(img), grad_embedding);
    }

    /// Raw 18-feature vector (before projection).
    std::array<double, kFeatures> features(const ImageBuffer& img) const {
        return compute_features(augmented(img)).values;
    }

private:
    struct Features {
        std::array<double, kFeatures> values{};
        std::array<double, 3> mean{};
        std::array<std::size_t, 4> quadrant_count{};
        int split_y = 0;
        int split_x = 0;
    };

    struct Forward {
        std::optional<ImageBuffer> augmented_input;  // empty without augmentation
        Features feats;
        std::vector<double> projected;  // after epsilon fix
        double norm = 0.0;
        std::vector<double> embedding;
    };

    ImageBuffer augmented(const ImageBuffer& img) const {
        return augmentation_ && augmentation_->forward ? augmentation_->forward(img) : img;
    }

    static Features compute_features(const ImageBuffer& img) {
        if (img.height < 1 || img.width < 1 ||
            img.pixels.size() != static_cast<std::size_t>(img.height) * img.width * 3)
            throw std::invalid_argument("embed_image: invalid image buffer");
        Features f;
        f.split_y = (img.height + 1) / 2;
        f.split_x = (img.width + 1) / 2;
        std::array<double, 12> qsum{};
        std::array<double, 3> sum{};
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const int q = (y >= f.split_y ? 2 : 0) + (x >= f.split_x ? 1 : 0);
                ++f.quadrant_count[q];
                for (int c = 0; c < 3; ++c) {
                    const double v = img.at(y, x, c);
                    qsum[q * 3 + c] += v;
                    sum[c] += v;
                }
            }
        }
        const double n = static_cast<double>(img.height) * img.width;
        for (int q = 0; q < 4; ++q)
            for (int c = 0; c < 3; ++c)
                f.values[q * 3 + c] =
                    f.quadrant_count[q] ? qsum[q * 3 + c] / f.quadrant_count[q] - 0.5 : 0.0;
        for (int c = 0; c < 3; ++c) {
            f.mean[c] = sum[c] / n;
            f.values[12 + c] = f.mean[c] - 0.5;
        }
        std::array<double, 3> ss{};
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const double d = img.pixels[i] - f.mean[i % 3];
            ss[i % 3] += d * d;
        }
        for (int c = 0; c < 3; ++c) f.values[15 + c] = 4.0 * ss[c] / n;
        return f;
    }

    Forward forward(const ImageBuffer& img) const {
        Forward out;
        if (augmentation_ && augmentation_->forward) out.augmented_input = augmentation_->forward(img);
        out.feats = compute_features(out.augmented_input ? *out.augmented_input : img);
        out.projected.assign(static_cast<std::size_t>(dim_), 0.0);
        for (int i = 0; i < dim_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < kFeatures; ++j)
                acc += projection_[static_cast<std::size_t>(i) * kFeatures + j] * out.feats.values[j];
            out.projected[i] = acc;
        }
        double n2 = 0.0;
        for (double v : out.projected) n2 += v * v;
        if (std::sqrt(n2) < kZeroNormEpsilon) {
            out.projected[0] += kZeroNormEpsilon;
            n2 = 0.0;
            for (double v : out.projected) n2 += v * v;
        }
        out.norm = std::sqrt(n2);
        out.embedding.resize(out.projected.size());
        for (std::size_t i = 0; i < out.projected.size(); ++i)
            out.embedding[i] = out.projected[i] / out.norm;
        return out;
    }

    std::vector<double> backward(const ImageBuffer& original, const Forward& f,
                                 std::span<const double> grad_embedding) const {
        // through normalization: (I - e e^T) g / |u|
        double eg = 0.0;
        for (std::size_t i = 0; i < f.embedding.size(); ++i) eg += f.embedding[i] * grad_embedding[i];
        std::array<double, kFeatures> gf{};
        for (int i = 0; i < dim_; ++i) {
            const double gu = (grad_embedding[i] - eg * f.embedding[i]) / f.norm;
            for (int j = 0; j < kFeatures; ++j)
                gf[j] += projection_[static_cast<std::size_t>(i) * kFeatures + j] * gu;
        }
        const ImageBuffer& img = f.augmented_input ? *f.augmented_input : original;
        const double n = static_cast<double>(img.height) * img.width;
        std::vector<double> grad(img.pixels.size());
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const int q = (y >= f.feats.split_y ? 2 : 0) + (x >= f.feats.split_x ? 1 : 0);
                const double inv_q = 1.0 / static_cast<double>(f.feats.quadrant_count[q]);
                for (int c = 0; c < 3; ++c) {
                    const double v = img.at(y, x, c);
                    grad[img.index(y, x, c)] = gf[q * 3 + c] * inv_q + gf[12 + c] / n +
                                               gf[15 + c] * 8.0 * (v - f.feats.mean[c]) / n;
                }
            }
        }
        if (augmentation_ && augmentation_->backward) return augmentation_->backward(original, grad);
        return grad;
    }

    int dim_;
    std::uint64_t seed_;
    std::optional<ImageAugmentation> augmentation_;
    std::vector<double> projection_;  // dim_ x kFeatures
};

/// Name -> factory lookup for scorer backends. Adapters for external models
/// register here; "toy" is always present.
class BackendRegistry {
public:
    using Factory =
        std::function<std::shared_ptr<const ScorerBackend>(const std::filesystem::path& checkpoint)>;

    BackendRegistry() {
        add("toy", [](const std::filesystem::path&) { return std::make_shared<const ToyScorer>(); });
    }

    void add(std::string name, Factory factory) { factories_[std::move(name)] = std::move(factory); }

    bool contains(const std::string& name) const { return factories_.count(name) != 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : factories_) out.push_back(k);
        return out;
    }

    std::shared_ptr<const ScorerBackend> make(const std::string& name,
                                              const std::filesystem::path& checkpoint = {}) const {
        auto it = factories_.find(name);
        if (it == factories_.end())
            throw std::invalid_argument("unknown scorer backend '" + name + "'");
        return it->second(checkpoint);
    }

private:
    std::map<std::string, Factory> factories_;
};

}  // namespace emogen
