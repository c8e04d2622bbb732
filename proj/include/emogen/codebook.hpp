// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emogen/rng.hpp"

namespace emogen {

/// Patch codebook with a linear patch decoder.
///
/// Each code is a `code_dim` vector. A code-space vector v decodes to a
/// patch_size x patch_size x 3 block as clamp(bias + W v, 0, 1), where W has
/// one row per patch value laid out (py, px, channel). Because the map is
/// linear before the clamp, decoding a probability-weighted mixture of codes
/// is differentiable in the mixture weights.
class Codebook {
public:
    Codebook(int num_codes, int code_dim, int patch_size, std::vector<double> codes,
             std::vector<double> decode_weights, std::vector<double> decode_bias)
        : num_codes_(num_codes),
          code_dim_(code_dim),
          patch_size_(patch_size),
          codes_(std::move(codes)),
          weights_(std::move(decode_weights)),
          bias_(std::move(decode_bias)) {
        if (num_codes_ < 2) throw std::invalid_argument("codebook: num_codes must be >= 2");
        if (code_dim_ < 1) throw std::invalid_argument("codebook: code_dim must be >= 1");
        if (patch_size_ < 1) throw std::invalid_argument("codebook: patch_size must be >= 1");
        const auto k = static_cast<std::size_t>(num_codes_);
        const auto d = static_cast<std::size_t>(code_dim_);
        if (codes_.size() != k * d)
            throw std::invalid_argument("codebook: codes must hold num_codes * code_dim values");
        if (weights_.size() != patch_values() * d)
            throw std::invalid_argument("codebook: decode weights must be (patch_size^2 * 3) x code_dim");
        if (bias_.size() != patch_values())
            throw std::invalid_argument("codebook: decode bias must be patch_size^2 * 3 values");
        auto finite = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        };
        if (!finite(codes_) || !finite(weights_) || !finite(bias_))
            throw std::invalid_argument("codebook: non-finite value");
    }

    /// Seeded synthetic codebook. Codes are standard normal; the decoder mixes
    /// a per-dimension flat color with a per-dimension spatial texture around
    /// mid-gray, so code choice controls both patch color and pattern.
    static Codebook toy(int num_codes, int code_dim, int patch_size, std::uint64_t seed) {
        if (num_codes < 2 || code_dim < 1 || patch_size < 1)
            throw std::invalid_argument("codebook: invalid toy dimensions");
        Rng rng(derive_seed(seed, 0xc0de));
        std::normal_distribution<double> normal(0.0, 1.0);
        const auto k = static_cast<std::size_t>(num_codes);
        const auto d = static_cast<std::size_t>(code_dim);
        const auto p = static_cast<std::size_t>(patch_size);
        std::vector<double> codes(k * d);
        for (auto& v : codes) v = normal(rng);

        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        std::vector<double> color(d * 3);
        for (auto& v : color) v = 0.30 * scale * normal(rng);
        std::vector<double> weights(p * p * 3 * d);
        for (std::size_t j = 0; j < p * p * 3; ++j) {
            const std::size_t ch = j % 3;
            for (std::size_t i = 0; i < d; ++i)
                weights[j * d + i] = color[i * 3 + ch] + 0.12 * scale * normal(rng);
        }
        std::vector<double> bias(p * p * 3, 0.5);
        return Codebook(num_codes, code_dim, patch_size, std::move(codes), std::move(weights),
                        std::move(bias));
    }

    int num_codes() const noexcept { return num_codes_; }
    int code_dim() const noexcept { return code_dim_; }
    int patch_size() const noexcept { return patch_size_; }
    std::size_t patch_values() const noexcept {
        const auto p = static_cast<std::size_t>(patch_size_);
        return p * p * 3;
    }

    std::span<const double> codes() const noexcept { return codes_; }
    std::span<const double> decode_weights() const noexcept { return weights_; }
    std::span<const double> decode_bias() const noexcept { return bias_; }

    std::span<const double> code(int k) const {
        if (k < 0 || k >= num_codes_) throw std::invalid_argument("codebook: code index out of range");
        const auto d = static_cast<std::size_t>(code_dim_);
        return std::span<const double>(codes_).subspan(static_cast<std::size_t>(k) * d, d);
    }

    /// Pre-clamp decoder output for a code-space vector.
    void decode_linear(std::span<const double> v, std::span<double> out) const {
        const auto d = static_cast<std::size_t>(code_dim_);
        for (std::size_t j = 0; j < patch_values(); ++j) {
            const double* w = weights_.data() + j * d;
            double acc = bias_[j];
            for (std::size_t i = 0; i < d; ++i) acc += w[i] * v[i];
            out[j] = acc;
        }
    }

    /// Clamped decoder output for a code-space vector.
    void decode_vector(std::span<const double> v, std::span<double> out) const {
        decode_linear(v, out);
        for (double& x : out) x = std::clamp(x, 0.0, 1.0);
    }

private:
    int num_codes_;
    int code_dim_;
    int patch_size_;
    std::vector<double> codes_;
    std::vector<double> weights_;
    std::vector<double> bias_;
};

struct GridShape {
    int rows = 0;
    int cols = 0;
    int num_codes = 0;

    std::size_t cells() const noexcept {
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
    std::size_t size() const noexcept { return cells() * static_cast<std::size_t>(num_codes); }
    bool operator==(const GridShape&) const = default;
};

/// Per-cell categorical logits; the optimization variable.
struct LogitGrid {
    GridShape shape;
    std::vector<double> logits;

    std::span<double> cell(std::size_t i) {
        const auto k = static_cast<std::size_t>(shape.num_codes);
        return std::span<double>(logits).subspan(i * k, k);
    }
    std::span<const double> cell(std::size_t i) const {
        const auto k = static_cast<std::size_t>(shape.num_codes);
        return std::span<const double>(logits).subspan(i * k, k);
    }
};

/// Per-cell categorical probabilities.
struct ProbGrid {
    GridShape shape;
    std::vector<double> probs;

    std::span<double> cell(std::size_t i) {
        const auto k = static_cast<std::size_t>(shape.num_codes);
        return std::span<double>(probs).subspan(i * k, k);
    }
    std::span<const double> cell(std::size_t i) const {
        const auto k = static_cast<std::size_t>(shape.num_codes);
        return std::span<const double>(probs).subspan(i * k, k);
    }
};

/// One selected code per cell, row-major.
struct CodeGrid {
    int rows = 0;
    int cols = 0;
    std::vector<int> codes;

    int at(int r, int c) const { return codes[static_cast<std::size_t>(r) * cols + c]; }
    bool operator==(const CodeGrid&) const = default;
};

/// RGB image, row-major HWC, values in [0, 1].
struct ImageBuffer {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    ImageBuffer() = default;
    ImageBuffer(int h, int w, double fill = 0.0)
        : height(h),
          width(w),
          pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {}

    std::size_t index(int y, int x, int ch) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * 3 + ch;
    }
    double& at(int y, int x, int ch) { return pixels[index(y, x, ch)]; }
    double at(int y, int x, int ch) const { return pixels[index(y, x, ch)]; }
    bool operator==(const ImageBuffer&) const = default;
};

inline LogitGrid init_logit_grid(int rows, int cols, int num_codes, double std_dev,
                                 std::uint64_t seed) {
    if (rows < 1 || cols < 1 || num_codes < 1)
        throw std::invalid_argument("init_logit_grid: dimensions must be positive");
    if (!(std_dev > 0.0) || !std::isfinite(std_dev))
        throw std::invalid_argument("init_logit_grid: std must be positive and finite");
    LogitGrid lg{{rows, cols, num_codes}, {}};
    lg.logits.resize(lg.shape.size());
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, std_dev);
    for (double& v : lg.logits) v = normal(rng);
    return lg;
}

inline ProbGrid softmax_grid(const LogitGrid& lg) {
    if (lg.logits.size() != lg.shape.size())
        throw std::invalid_argument("softmax_grid: logit count does not match shape");
    ProbGrid pg{lg.shape, std::vector<double>(lg.logits.size())};
    for (std::size_t i = 0; i < lg.shape.cells(); ++i) {
        auto in = lg.cell(i);
        auto out = pg.cell(i);
        double hi = -INFINITY;
        for (double v : in) {
            if (!std::isfinite(v)) throw std::invalid_argument("softmax_grid: non-finite logit");
            hi = std::max(hi, v);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < in.size(); ++k) total += out[k] = std::exp(in[k] - hi);
        for (double& p : out) p /= total;
    }
    return pg;
}

/// Throws unless every cell is a probability vector (sum 1 within 1e-6).
inline void validate(const ProbGrid& pg) {
    if (pg.shape.rows < 1 || pg.shape.cols < 1 || pg.shape.num_codes < 1 ||
        pg.probs.size() != pg.shape.size())
        throw std::invalid_argument("prob grid: shape mismatch");
    for (std::size_t i = 0; i < pg.shape.cells(); ++i) {
        double total = 0.0;
        for (double p : pg.cell(i)) {
            if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("prob grid: entry outside [0, 1]");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-6)
            throw std::invalid_argument("prob grid: cell " + std::to_string(i) + " does not sum to 1");
    }
}

/// Independent categorical draw per cell (inverse CDF on one uniform per cell).
inline CodeGrid sample_codes(const ProbGrid& pg, std::uint64_t seed) {
    validate(pg);
    CodeGrid cg{pg.shape.rows, pg.shape.cols, std::vector<int>(pg.shape.cells())};
    Rng rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t i = 0; i < pg.shape.cells(); ++i) {
        auto p = pg.cell(i);
        const double u = uniform(rng);
        double cum = 0.0;
        int chosen = -1;
        int last_nonzero = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (p[k] <= 0.0) continue;
            last_nonzero = static_cast<int>(k);
            cum += p[k];
            if (u < cum) {
                chosen = static_cast<int>(k);
                break;
            }
        }
        // u landed in the rounding slack above the accumulated sum
        cg.codes[i] = chosen >= 0 ? chosen : last_nonzero;
    }
    return cg;
}

/// Per-cell argmax; ties go to the lowest index.
inline CodeGrid argmax_codes(const LogitGrid& lg) {
    CodeGrid cg{lg.shape.rows, lg.shape.cols, std::vector<int>(lg.shape.cells())};
    for (std::size_t i = 0; i < lg.shape.cells(); ++i) {
        auto v = lg.cell(i);
        cg.codes[i] = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
    }
    return cg;
}

/// One-hot probabilities for a code grid.
inline ProbGrid one_hot(const CodeGrid& cg, int num_codes) {
    ProbGrid pg{{cg.rows, cg.cols, num_codes}, {}};
    pg.probs.assign(pg.shape.size(), 0.0);
    for (std::size_t i = 0; i < cg.codes.size(); ++i) {
        if (cg.codes[i] < 0 || cg.codes[i] >= num_codes)
            throw std::invalid_argument("one_hot: code index out of range");
        pg.probs[i * static_cast<std::size_t>(num_codes) + cg.codes[i]] = 1.0;
    }
    return pg;
}

namespace detail {

inline void write_patch(ImageBuffer& img, int r, int c, int p, std::span<const double> patch) {
    for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px)
            for (int ch = 0; ch < 3; ++ch)
                img.at(r * p + py, c * p + px, ch) =
                    patch[(static_cast<std::size_t>(py) * p + px) * 3 + ch];
}

inline void read_patch(std::span<const double> full, int width, int r, int c, int p,
                       std::span<double> patch) {
    for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px)
            for (int ch = 0; ch < 3; ++ch)
                patch[(static_cast<std::size_t>(py) * p + px) * 3 + ch] =
                    full[((static_cast<std::size_t>(r) * p + py) * width + c * p + px) * 3 + ch];
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Pre-clamp decoder output for every cell of a weight grid: one row of
// patch_values() per cell, computed as (P C) W^T + b.
inline RowMatrix soft_preactivations(const ProbGrid& pg, const Codebook& cb) {
    const auto cells = static_cast<Eigen::Index>(pg.shape.cells());
    const ConstRowMap probs(pg.probs.data(), cells, cb.num_codes());
    const ConstRowMap codes(cb.codes().data(), cb.num_codes(), cb.code_dim());
    const ConstRowMap weights(cb.decode_weights().data(), static_cast<Eigen::Index>(cb.patch_values()),
                              cb.code_dim());
    const Eigen::Map<const Eigen::RowVectorXd> bias(cb.decode_bias().data(),
                                                    static_cast<Eigen::Index>(cb.patch_values()));
    const RowMatrix mix = probs * codes;
    RowMatrix pre = mix * weights.transpose();
    pre.rowwise() += bias;
    return pre;
}

inline void check_soft_inputs(const ProbGrid& pg, const Codebook& cb, const char* who) {
    if (pg.shape.num_codes != cb.num_codes())
        throw std::invalid_argument(std::string(who) + ": grid and codebook disagree on num_codes");
    if (pg.probs.size() != pg.shape.size())
        throw std::invalid_argument(std::string(who) + ": prob grid shape mismatch");
}

inline ImageBuffer image_from_preactivations(const RowMatrix& pre, const GridShape& shape,
                                             const Codebook& cb) {
    const int p = cb.patch_size();
    ImageBuffer img(shape.rows * p, shape.cols * p);
    std::vector<double> patch(cb.patch_values());
    for (int r = 0; r < shape.rows; ++r) {
        for (int c = 0; c < shape.cols; ++c) {
            const auto row = pre.row(static_cast<Eigen::Index>(r) * shape.cols + c);
            for (std::size_t j = 0; j < patch.size(); ++j)
                patch[j] = std::clamp(row(static_cast<Eigen::Index>(j)), 0.0, 1.0);
            write_patch(img, r, c, p, patch);
        }
    }
    return img;
}

// Consumes the forward preactivations, reusing them as the gradient buffer.
inline std::vector<double> backward_from_preactivations(RowMatrix pre, const GridShape& shape,
                                                        const Codebook& cb,
                                                        std::span<const double> grad_pixels) {
    const int p = cb.patch_size();
    const int width = shape.cols * p;
    if (grad_pixels.size() != static_cast<std::size_t>(shape.rows * p) * width * 3)
        throw std::invalid_argument("decode_soft_backward: gradient shape mismatch");
    const auto pv = cb.patch_values();
    // Upstream gradient per cell, zeroed where the forward clamp was active.
    std::vector<double> gpatch(pv);
    for (int r = 0; r < shape.rows; ++r) {
        for (int c = 0; c < shape.cols; ++c) {
            read_patch(grad_pixels, width, r, c, p, gpatch);
            auto row = pre.row(static_cast<Eigen::Index>(r) * shape.cols + c);
            for (std::size_t j = 0; j < pv; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                row(jj) = row(jj) > 0.0 && row(jj) < 1.0 ? gpatch[j] : 0.0;
            }
        }
    }
    const ConstRowMap codes(cb.codes().data(), cb.num_codes(), cb.code_dim());
    const ConstRowMap w(cb.decode_weights().data(), static_cast<Eigen::Index>(pv), cb.code_dim());
    std::vector<double> out(shape.size());
    Eigen::Map<RowMatrix> out_map(out.data(), static_cast<Eigen::Index>(shape.cells()), cb.num_codes());
    out_map.noalias() = (pre * w) * codes.transpose();
    return out;
}

}  // namespace detail

/// Decodes each cell from the expectation of its code vector under the
/// cell's distribution.
inline ImageBuffer decode_soft(const ProbGrid& pg, const Codebook& cb) {
    detail::check_soft_inputs(pg, cb, "decode_soft");
    return detail::image_from_preactivations(detail::soft_preactivations(pg, cb), pg.shape, cb);
}

/// Decode a discrete code grid. Shares the soft decoder's arithmetic, so a
/// one-hot weight grid decodes to the same bits.
inline ImageBuffer decode_hard(const CodeGrid& cg, const Codebook& cb) {
    if (cg.codes.size() != static_cast<std::size_t>(cg.rows) * cg.cols)
        throw std::invalid_argument("decode_hard: code grid shape mismatch");
    for (int k : cg.codes)
        if (k < 0 || k >= cb.num_codes())
            throw std::invalid_argument("decode_hard: code index " + std::to_string(k) + " out of range");
    const auto pg = one_hot(cg, cb.num_codes());
    return detail::image_from_preactivations(detail::soft_preactivations(pg, cb), pg.shape, cb);
}

/// Vector-Jacobian product of decode_soft with respect to the mixture weights.
///
/// `weights` fixes the forward pass (and therefore which pixels sat on the
/// clamp boundary, which get zero gradient). For straight-through use, pass the
/// one-hot sample here. Returns a tensor shaped like `weights.probs`.
inline std::vector<double> decode_soft_backward(const ProbGrid& weights, const Codebook& cb,
                                                std::span<const double> grad_pixels) {
    detail::check_soft_inputs(weights, cb, "decode_soft_backward");
    return detail::backward_from_preactivations(detail::soft_preactivations(weights, cb), weights.shape,
                                                cb, grad_pixels);
}

/// Vector-Jacobian product of softmax_grid: maps d/dprobs to d/dlogits.
inline std::vector<double> softmax_backward(const ProbGrid& pg, std::span<const double> grad_probs) {
    if (grad_probs.size() != pg.probs.size())
        throw std::invalid_argument("softmax_backward: gradient shape mismatch");
    std::vector<double> out(pg.probs.size());
    const auto k = static_cast<std::size_t>(pg.shape.num_codes);
    for (std::size_t i = 0; i < pg.shape.cells(); ++i) {
        const double* p = pg.probs.data() + i * k;
        const double* g = grad_probs.data() + i * k;
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += p[j] * g[j];
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = p[j] * (g[j] - dot);
    }
    return out;
}

}  // namespace emogen
