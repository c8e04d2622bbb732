// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "emogen/codebook.hpp"
#include "emogen/errors.hpp"
#include "emogen/prompts.hpp"
#include "emogen/rng.hpp"
#include "emogen/scorer.hpp"

namespace emogen {

struct AdamWConfig {
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    int steps = 300;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("adamw: learning_rate must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adamw: beta1 must be in [0, 1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adamw: beta2 must be in [0, 1)");
        if (!(epsilon > 0.0)) throw std::invalid_argument("adamw: epsilon must be > 0");
        if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
            throw std::invalid_argument("adamw: weight_decay must be >= 0");
        if (steps < 0) throw std::invalid_argument("adamw: steps must be >= 0");
    }
};

struct AdamWState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
};

/// One AdamW update in place: decoupled weight decay, then the bias-corrected
/// Adam step. Empty moment buffers are zero-initialised on first use.
inline void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                       const AdamWConfig& cfg, std::string_view tensor_name = "params") {
    cfg.validate();
    if (grads.size() != params.size())
        throw std::invalid_argument("adamw: gradient shape does not match '" +
                                    std::string(tensor_name) + "'");
    if (state.first_moment.empty() && state.second_moment.empty()) {
        state.first_moment.assign(params.size(), 0.0);
        state.second_moment.assign(params.size(), 0.0);
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
        throw std::invalid_argument("adamw: optimizer state shape does not match '" +
                                    std::string(tensor_name) + "'");
    for (double g : grads)
        if (!std::isfinite(g))
            throw NumericalError("adamw: non-finite gradient for '" + std::string(tensor_name) + "'");

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double step_size = cfg.learning_rate / (1.0 - std::pow(cfg.beta1, t));
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(1.0 - std::pow(cfg.beta2, t));
    const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
    double* p = params.data();
    const double* gp = grads.data();
    double* mp = state.first_moment.data();
    double* vp = state.second_moment.data();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = gp[i];
        mp[i] = cfg.beta1 * mp[i] + (1.0 - cfg.beta1) * g;
        vp[i] = cfg.beta2 * vp[i] + (1.0 - cfg.beta2) * g * g;
        p[i] = p[i] * decay - step_size * mp[i] / (std::sqrt(vp[i]) * inv_sqrt_bc2 + cfg.epsilon);
    }
}

enum class DecodeMode {
    Soft,             // decode the expected code vector of each cell
    StraightThrough,  // decode a hard sample, back-propagate through the soft path
};

inline std::string_view to_string(DecodeMode m) {
    return m == DecodeMode::Soft ? "soft" : "st";
}

inline DecodeMode parse_decode_mode(std::string_view s) {
    if (s == "soft") return DecodeMode::Soft;
    if (s == "st" || s == "straight_through" || s == "straight-through")
        return DecodeMode::StraightThrough;
    throw std::invalid_argument("unknown decode mode '" + std::string(s) + "' (expected soft|st)");
}

struct GenerationConfig {
    AdamWConfig optimizer;
    int grid_rows = 16;
    int grid_cols = 16;
    double init_std = 1.0;
    DecodeMode mode = DecodeMode::Soft;

    void validate() const {
        optimizer.validate();
        if (grid_rows < 1 || grid_cols < 1) throw std::invalid_argument("generation: grid must be >= 1x1");
        if (!(init_std > 0.0) || !std::isfinite(init_std))
            throw std::invalid_argument("generation: init_std must be > 0");
    }
};

struct GenerationResult {
    std::string prompt;
    std::uint64_t seed = 0;
    GenerationConfig config;
    ImageBuffer final_image;
    CodeGrid final_codes;
    LogitGrid final_logits;
    /// Relaxed (soft-decoded) loss at the initial logits and after every step.
    std::vector<double> loss_trajectory;
    /// Loss of final_image, i.e. of the argmax decode.
    double final_hard_loss = 0.0;
};

struct LogitLossGradient {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

/// Loss of the soft-decoded image for `lg`.
inline double relaxed_loss(const LogitGrid& lg, const Codebook& cb, const ScorerBackend& backend,
                           const PromptEmbedding& pe) {
    return similarity_loss(backend.embed_image(decode_soft(softmax_grid(lg), cb)), pe);
}

/// Loss and d(loss)/d(logits).
///
/// Soft mode differentiates the soft decode exactly. Straight-through mode
/// decodes a hard sample drawn with `sample_seed` and routes the pixel
/// gradient through the sample's one-hot weights and the softmax Jacobian.
inline LogitLossGradient logit_loss_gradient(const LogitGrid& lg, const Codebook& cb,
                                             const ScorerBackend& backend, const PromptEmbedding& pe,
                                             DecodeMode mode = DecodeMode::Soft,
                                             std::uint64_t sample_seed = 0) {
    const ProbGrid pg = softmax_grid(lg);
    detail::check_soft_inputs(pg, cb, "logit_loss_gradient");
    // The forward preactivations are shared with the backward pass.
    auto run = [&](const ProbGrid& weights) {
        detail::RowMatrix pre = detail::soft_preactivations(weights, cb);
        const ImageBuffer img = detail::image_from_preactivations(pre, weights.shape, cb);
        LossGradient lgp = backend.loss_gradient(img, pe);
        auto grad_weights =
            detail::backward_from_preactivations(std::move(pre), weights.shape, cb, lgp.grad_pixels);
        return LogitLossGradient{lgp.loss, softmax_backward(pg, grad_weights)};
    };
    if (mode == DecodeMode::Soft) return run(pg);
    return run(one_hot(sample_codes(pg, sample_seed), pg.shape.num_codes));
}

/// Optimizes a logit grid toward `prompt` and decodes the argmax codes.
///
/// Logits start from init_logit_grid(rows, cols, K, init_std, seed). The
/// straight-through sample at step s uses derive_seed(seed, s + 1).
inline GenerationResult run_generation(std::string_view prompt, const Codebook& cb,
                                       const ScorerBackend& backend, const GenerationConfig& cfg,
                                       std::uint64_t seed) {
    cfg.validate();
    if (!backend.differentiable())
        throw UnsupportedOperation("run_generation: scorer backend '" + backend.name() +
                                   "' is not differentiable");
    const PromptEmbedding pe = backend.embed_text(prompt);

    GenerationResult res;
    res.prompt = std::string(prompt);
    res.seed = seed;
    res.config = cfg;
    LogitGrid lg = init_logit_grid(cfg.grid_rows, cfg.grid_cols, cb.num_codes(), cfg.init_std, seed);
    AdamWState state;
    res.loss_trajectory.reserve(static_cast<std::size_t>(cfg.optimizer.steps) + 1);

    auto check = [](double loss, int step) {
        if (!std::isfinite(loss))
            throw NumericalError("run_generation: non-finite loss at step " + std::to_string(step));
        return loss;
    };

    for (int step = 0; step < cfg.optimizer.steps; ++step) {
        LogitLossGradient eval =
            logit_loss_gradient(lg, cb, backend, pe, cfg.mode, derive_seed(seed, step + 1));
        if (cfg.mode == DecodeMode::Soft)
            res.loss_trajectory.push_back(check(eval.loss, step));
        else
            res.loss_trajectory.push_back(check(relaxed_loss(lg, cb, backend, pe), step));
        adamw_step(lg.logits, eval.grad_logits, state, cfg.optimizer, "logits");
    }
    res.loss_trajectory.push_back(check(relaxed_loss(lg, cb, backend, pe), cfg.optimizer.steps));

    res.final_codes = argmax_codes(lg);
    res.final_image = decode_hard(res.final_codes, cb);
    res.final_hard_loss = similarity_loss(backend.embed_image(res.final_image), pe);
    res.final_logits = std::move(lg);
    return res;
}

inline nlohmann::json to_json(const AdamWConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
            {"epsilon", c.epsilon}, {"weight_decay", c.weight_decay}, {"steps", c.steps}};
}

inline nlohmann::json to_json(const GenerationConfig& c) {
    return {{"optimizer", to_json(c.optimizer)},
            {"grid_rows", c.grid_rows},
            {"grid_cols", c.grid_cols},
            {"init_std", c.init_std},
            {"mode", std::string(to_string(c.mode))}};
}

/// Sidecar document for a finished run.
inline nlohmann::json to_json(const GenerationResult& r) {
    nlohmann::json codes = nlohmann::json::array();
    for (int row = 0; row < r.final_codes.rows; ++row) {
        nlohmann::json line = nlohmann::json::array();
        for (int col = 0; col < r.final_codes.cols; ++col) line.push_back(r.final_codes.at(row, col));
        codes.push_back(std::move(line));
    }
    return {{"prompt", r.prompt},
            {"seed", r.seed},
            {"config", to_json(r.config)},
            {"loss_trajectory", r.loss_trajectory},
            {"final_hard_loss", r.final_hard_loss},
            {"image", {{"height", r.final_image.height}, {"width", r.final_image.width}}},
            {"codes", std::move(codes)}};
}

struct BatchConfig {
    GenerationConfig generation;
    std::uint64_t base_seed = 0;
    int workers = 1;
};

struct BatchItem {
    PromptSpec spec;
    std::uint64_t seed = 0;
    std::optional<GenerationResult> result;
    std::string error;  // empty on success

    bool ok() const noexcept { return result.has_value(); }
};

/// Seed for a dataset entry; depends only on the base seed and the spec index.
constexpr std::uint64_t spec_seed(std::uint64_t base_seed, int spec_index) noexcept {
    return derive_seed(base_seed, static_cast<std::uint64_t>(spec_index));
}

/// Runs every spec, possibly on several threads. Output order follows input
/// order; a failed run records its error and leaves the others untouched.
inline std::vector<BatchItem> batch_generate(std::span<const PromptSpec> specs, const Codebook& cb,
                                             const ScorerBackend& backend, const BatchConfig& cfg) {
    if (specs.empty()) throw std::invalid_argument("batch_generate: empty spec list");
    cfg.generation.validate();
    std::vector<BatchItem> out(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        out[i].spec = specs[i];
        out[i].seed = spec_seed(cfg.base_seed, specs[i].index);
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < out.size(); i = next++) {
            BatchItem& item = out[i];
            try {
                item.result = run_generation(item.spec.text, cb, backend, cfg.generation, item.seed);
            } catch (const std::exception& e) {
                item.error = "spec " + std::to_string(item.spec.index) + " ('" + item.spec.text +
                             "'): " + e.what();
            }
        }
    };
    const auto n_workers =
        static_cast<std::size_t>(std::clamp<int>(cfg.workers, 1, static_cast<int>(specs.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

}  // namespace emogen
