// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emogen/emogen.hpp"

namespace emogen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Process exit codes.
enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

inline constexpr const char* kOutEnv = "EMOGEN_OUT";

/// Options shared by `generate` and `dataset`.
struct GenerateOptions {
    std::uint64_t seed = 0;
    int steps = 300;
    double lr = 0.05;
    double weight_decay = 0.0;
    double init_std = 1.0;
    std::string grid = "16x16";
    int codes = 1024;
    int code_dim = 16;
    int patch = 16;
    std::uint64_t codebook_seed = 0;
    std::string codebook_path;
    std::string mode = "soft";
    std::string backend = "toy";
    std::string checkpoint;
    bool toy = false;
    std::string out = "out";
};

inline std::pair<int, int> parse_grid(const std::string& s) {
    int rows = 0, cols = 0;
    char sep = 0;
    std::istringstream is(s);
    if (!(is >> rows)) throw std::invalid_argument("--grid: expected N or RxC, got '" + s + "'");
    if (is >> sep) {
        if ((sep != 'x' && sep != 'X') || !(is >> cols))
            throw std::invalid_argument("--grid: expected N or RxC, got '" + s + "'");
    } else {
        cols = rows;
    }
    std::string rest;
    if (is >> rest) throw std::invalid_argument("--grid: trailing characters in '" + s + "'");
    if (rows < 1 || cols < 1) throw std::invalid_argument("--grid: dimensions must be positive");
    return {rows, cols};
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string file_digest(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

inline std::string slug(std::string_view text) {
    std::string out;
    for (unsigned char c : normalize_prompt(text)) {
        if (std::isalnum(c))
            out.push_back(static_cast<char>(c));
        else if (!out.empty() && out.back() != '-')
            out.push_back('-');
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "image" : out;
}

inline void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << j.dump(2) << '\n';
}

inline json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot open " + p.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw std::runtime_error(p.string() + ": " + e.what());
    }
}

/// Everything needed to rebuild a generation run.
struct GenerationSetup {
    std::shared_ptr<const Codebook> codebook;
    std::shared_ptr<const ScorerBackend> backend;
    GenerationConfig config;
    json run_config;
};

inline GenerationSetup make_setup(const GenerateOptions& o, const BackendRegistry& registry) {
    GenerationSetup s;
    const auto [rows, cols] = parse_grid(o.grid);
    s.config.grid_rows = rows;
    s.config.grid_cols = cols;
    s.config.init_std = o.init_std;
    s.config.mode = parse_decode_mode(o.mode);
    s.config.optimizer.steps = o.steps;
    s.config.optimizer.learning_rate = o.lr;
    s.config.optimizer.weight_decay = o.weight_decay;
    s.config.validate();

    json cb_cfg;
    if (!o.codebook_path.empty() && !o.toy) {
        s.codebook = std::make_shared<const Codebook>(load_codebook(o.codebook_path));
        cb_cfg = {{"source", "file"},
                  {"path", o.codebook_path},
                  {"fnv1a64", file_digest(o.codebook_path)}};
    } else {
        s.codebook = std::make_shared<const Codebook>(
            Codebook::toy(o.codes, o.code_dim, o.patch, o.codebook_seed));
        cb_cfg = {{"source", "toy"}, {"seed", o.codebook_seed}};
    }
    cb_cfg["num_codes"] = s.codebook->num_codes();
    cb_cfg["code_dim"] = s.codebook->code_dim();
    cb_cfg["patch_size"] = s.codebook->patch_size();

    const std::string backend = o.toy ? "toy" : o.backend;
    s.backend = registry.make(backend, o.checkpoint);
    s.run_config = {{"generation", to_json(s.config)},
                    {"codebook", cb_cfg},
                    {"backend", {{"name", backend}, {"checkpoint", o.toy ? "" : o.checkpoint}}}};
    return s;
}

inline void add_generation_flags(CLI::App* cmd, GenerateOptions& o) {
    cmd->add_option("--steps", o.steps, "Optimizer steps")->capture_default_str();
    cmd->add_option("--lr", o.lr, "AdamW learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay")
        ->capture_default_str();
    cmd->add_option("--init-std", o.init_std, "Std-dev of the Gaussian logit init")
        ->capture_default_str();
    cmd->add_option("--grid", o.grid, "Grid size in cells: N or RxC")->capture_default_str();
    cmd->add_option("--codes", o.codes, "Toy codebook size")->capture_default_str();
    cmd->add_option("--code-dim", o.code_dim, "Toy code dimension")->capture_default_str();
    cmd->add_option("--patch", o.patch, "Toy patch size in pixels")->capture_default_str();
    cmd->add_option("--codebook-seed", o.codebook_seed, "Toy codebook seed")->capture_default_str();
    cmd->add_option("--codebook", o.codebook_path, "Codebook file (JSON header + f32 blob)");
    cmd->add_option("--mode", o.mode, "Relaxation: soft|st")->capture_default_str();
    cmd->add_option("--backend", o.backend, "Scorer backend name")->capture_default_str();
    cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint path for adapter backends");
    cmd->add_flag("--toy", o.toy, "Force the built-in toy codebook and scorer");
    cmd->add_option("--out", o.out, "Output directory")->envname(kOutEnv)->capture_default_str();
}

// ---------------------------------------------------------------------------

inline int cmd_generate(const std::string& prompt, const GenerateOptions& o,
                        const BackendRegistry& registry, std::ostream& out) {
    const auto setup = make_setup(o, registry);
    const auto res = run_generation(prompt, *setup.codebook, *setup.backend, setup.config, o.seed);
    fs::create_directories(o.out);
    const std::string stem = slug(prompt) + "-" + std::to_string(o.seed);
    const fs::path png = fs::path(o.out) / (stem + ".png");
    const fs::path sidecar = fs::path(o.out) / (stem + ".json");
    write_png(png, res.final_image);
    json doc = to_json(res);
    doc["run_config"] = setup.run_config;
    doc["png"] = png.filename().string();
    write_json(sidecar, doc);
    out << "wrote " << png.string() << " (loss " << res.loss_trajectory.front() << " -> "
        << res.loss_trajectory.back() << ", hard " << res.final_hard_loss << ")\n";
    return kOk;
}

inline std::string dataset_stem(const PromptSpec& s) {
    char idx[8];
    std::snprintf(idx, sizeof idx, "%02d", s.index);
    return std::string(idx) + "_" + std::string(info(s.affect).name) + "_" +
           std::string(info(s.genre).slug);
}

inline int cmd_dataset(const GenerateOptions& o, int workers, const BackendRegistry& registry,
                       std::ostream& out, std::ostream& err) {
    const auto setup = make_setup(o, registry);
    const auto specs = enumerate_dataset();
    BatchConfig bc{setup.config, o.seed, workers};
    const auto items = batch_generate(specs, *setup.codebook, *setup.backend, bc);

    fs::create_directories(o.out);
    json entries = json::array();
    int failures = 0;
    for (const auto& item : items) {
        json e = to_json(item.spec);
        e["seed"] = item.seed;
        if (!item.ok()) {
            ++failures;
            e["status"] = "failed";
            e["error"] = item.error;
            err << "error: " << item.error << '\n';
            entries.push_back(std::move(e));
            continue;
        }
        const std::string stem = dataset_stem(item.spec);
        const fs::path png = fs::path(o.out) / (stem + ".png");
        const fs::path sidecar = fs::path(o.out) / (stem + ".json");
        write_png(png, item.result->final_image);
        json doc = to_json(*item.result);
        doc["run_config"] = setup.run_config;
        doc["spec"] = to_json(item.spec);
        doc["png"] = png.filename().string();
        write_json(sidecar, doc);
        e["status"] = "ok";
        e["png"] = png.filename().string();
        e["sidecar"] = sidecar.filename().string();
        e["png_fnv1a64"] = file_digest(png);
        e["initial_loss"] = item.result->loss_trajectory.front();
        e["final_loss"] = item.result->loss_trajectory.back();
        e["final_hard_loss"] = item.result->final_hard_loss;
        entries.push_back(std::move(e));
    }
    json manifest = {{"base_seed", o.seed}, {"run_config", setup.run_config}, {"images", entries}};
    write_json(fs::path(o.out) / "manifest.json", manifest);
    out << "wrote " << (items.size() - failures) << "/" << items.size() << " images and "
        << (fs::path(o.out) / "manifest.json").string() << '\n';
    return failures ? kRuntimeError : kOk;
}

struct ManifestEntry {
    PromptSpec spec;
    fs::path png;
};

/// Successful entries of a dataset manifest; png paths resolved against its directory.
inline std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    const json m = read_json(path);
    std::vector<ManifestEntry> out;
    for (const auto& e : m.at("images")) {
        if (e.value("status", "ok") != "ok") continue;
        out.push_back({prompt_spec_from_json(e), path.parent_path() / e.at("png").get<std::string>()});
    }
    return out;
}

inline std::vector<PromptSpec> manifest_prompts(const fs::path& path) {
    const json m = read_json(path);
    std::vector<PromptSpec> out;
    for (const auto& e : m.at("images")) out.push_back(prompt_spec_from_json(e));
    return out;
}

struct PaletteOptions {
    std::vector<std::string> images;
    std::string manifest;
    std::string survey;
    std::string out = "out";
    PaletteThresholds thresholds;
    double alpha = 0.05;
};

inline int cmd_palette(const PaletteOptions& o, std::ostream& out, std::ostream& err) {
    if (o.images.empty() && o.manifest.empty())
        throw CLI::ValidationError("palette", "no input images (give image paths or --manifest)");
    if (!o.survey.empty() && o.manifest.empty())
        throw CLI::ValidationError("palette", "--survey needs --manifest to map images to prompts");

    std::vector<std::pair<std::string, fs::path>> inputs;
    std::map<std::string, PromptSpec> spec_of;
    if (!o.manifest.empty()) {
        for (const auto& e : read_manifest(o.manifest)) {
            const std::string id = std::to_string(e.spec.index);
            inputs.emplace_back(id, e.png);
            spec_of.emplace(id, e.spec);
        }
    }
    for (const auto& p : o.images) inputs.emplace_back(fs::path(p).filename().string(), p);

    std::vector<PaletteProfile> profiles;
    int failures = 0;
    for (const auto& [id, path] : inputs) {
        try {
            profiles.push_back(palette_profile(read_png(path), id, o.thresholds));
        } catch (const std::exception& e) {
            ++failures;
            err << "error: cannot read image " << path.string() << ": " << e.what() << '\n';
        }
    }

    fs::create_directories(o.out);
    {
        std::ofstream os(fs::path(o.out) / "palette_profiles.csv");
        write_palette_csv(os, profiles);
    }
    out << "wrote " << profiles.size() << " profiles to "
        << (fs::path(o.out) / "palette_profiles.csv").string() << '\n';

    if (!spec_of.empty()) {
        std::vector<PaletteProfile> linked;
        for (const auto& p : profiles)
            if (spec_of.count(p.image_id)) linked.push_back(p);
        for (Grouping g : {Grouping::Affect, Grouping::Genre}) {
            std::vector<std::string> keys;
            for (const auto& p : linked) keys.push_back(group_key(spec_of.at(p.image_id), g));
            if (linked.empty()) break;
            const auto groups = aggregate_profiles(linked, keys);
            const fs::path path =
                fs::path(o.out) / (g == Grouping::Affect ? "palette_by_affect.csv" : "palette_by_genre.csv");
            std::ofstream os(path);
            std::vector<std::string> head{"group", "images"};
            for (auto n : kPaletteBinNames) head.emplace_back(n);
            for (auto n : kDerivedFeatureNames) head.emplace_back(n);
            os << csv::join(head) << '\n';
            for (const auto& gp : groups) {
                std::vector<std::string> row{gp.group, std::to_string(gp.count)};
                for (double v : gp.mean) row.push_back(csv::number(v));
                for (double v : as_array(gp.features)) row.push_back(csv::number(v));
                os << csv::join(row) << '\n';
            }
        }
    }

    if (!o.survey.empty()) {
        const auto ds = load_survey(o.survey, manifest_prompts(o.manifest));
        std::map<int, std::pair<double, double>> sums;  // quality, novelty
        std::map<int, int> counts;
        for (const auto& r : ds.responses()) {
            sums[r.image_index].first += r.quality;
            sums[r.image_index].second += r.novelty;
            ++counts[r.image_index];
        }
        std::vector<std::string> names;
        std::vector<std::vector<double>> features;
        for (int b = 0; b < kPaletteBins; ++b) names.emplace_back(kPaletteBinNames[b]);
        for (auto n : kDerivedFeatureNames) names.emplace_back(n);
        features.resize(names.size());
        std::vector<double> quality, novelty;
        for (const auto& p : profiles) {
            if (!spec_of.count(p.image_id)) continue;
            const int idx = spec_of.at(p.image_id).index;
            if (!counts.count(idx)) continue;
            quality.push_back(sums[idx].first / counts[idx]);
            novelty.push_back(sums[idx].second / counts[idx]);
            for (int b = 0; b < kPaletteBins; ++b) features[b].push_back(p.ratios[b]);
            const auto d = as_array(derived_features(p.ratios));
            for (std::size_t k = 0; k < d.size(); ++k) features[kPaletteBins + k].push_back(d[k]);
        }
        const fs::path path = fs::path(o.out) / "palette_correlations.csv";
        std::ofstream os(path);
        os << "feature,rating,r,n,p_value,significant\n";
        for (std::size_t f = 0; f < names.size(); ++f) {
            for (const auto& [rating, ys] :
                 {std::pair<std::string, const std::vector<double>*>{"quality", &quality},
                  std::pair<std::string, const std::vector<double>*>{"novelty", &novelty}}) {
                std::string r_str = "", p_str = "", sig = "undefined";
                try {
                    const auto rep = correlate_feature_ratings(features[f], *ys, names[f], o.alpha);
                    r_str = csv::number(rep.r);
                    p_str = csv::number(rep.p_value);
                    sig = rep.significant ? "yes" : "no";
                    out << names[f] << " x " << rating << ": r=" << rep.r << " p=" << rep.p_value
                        << (rep.significant ? " (significant)" : "") << '\n';
                } catch (const std::exception& e) {
                    out << names[f] << " x " << rating << ": " << e.what() << '\n';
                }
                os << csv::join({names[f], rating, r_str, std::to_string(ys->size()), p_str, sig})
                   << '\n';
            }
        }
    }
    return failures ? kRuntimeError : kOk;
}

struct SurveyOptions {
    std::string csv;
    std::string manifest;
    std::string out;
    std::string other_rule = "wrong";
    std::string ci_basis = "ratings";
};

inline int cmd_survey(const SurveyOptions& o, std::ostream& out) {
    const auto prompts = o.manifest.empty() ? enumerate_dataset() : manifest_prompts(o.manifest);
    const auto rule = parse_other_rule(o.other_rule);
    const auto basis = parse_ci_basis(o.ci_basis);
    if (!fs::exists(o.csv)) throw std::runtime_error("cannot open " + o.csv);
    const auto ds = load_survey(o.csv, prompts);
    if (ds.empty()) throw std::invalid_argument("survey file has no responses");

    const auto cm = confusion_matrix(ds);
    const auto by_affect = per_group_summary(ds, Grouping::Affect, basis);
    const auto by_genre = per_group_summary(ds, Grouping::Genre, basis);
    const auto va = valence_arousal_summary(ds, rule);
    const double majority = images_majority_matched(ds);

    out << "Confusion matrix (rows: intended affect, columns: answer)\n"
        << format_confusion_table(cm) << '\n'
        << "Per affective prompt (CI basis: " << to_string(basis) << ")\n"
        << format_summary_table(by_affect, "Affective prompt") << '\n'
        << "Per painting type (CI basis: " << to_string(basis) << ")\n"
        << format_summary_table(by_genre, "Genre prompt") << '\n';
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "Valence accuracy (Other %s): %.1f%% (low %.1f%%, high %.1f%%)\n"
                  "Arousal accuracy (Other %s): %.1f%% (low %.1f%%, high %.1f%%)\n"
                  "Images matched by at least half of responses: %.1f%%\n",
                  std::string(to_string(rule)).c_str(), va.valence.overall, va.valence.low,
                  va.valence.high, std::string(to_string(rule)).c_str(), va.arousal.overall,
                  va.arousal.low, va.arousal.high, majority);
    out << buf;

    if (!o.out.empty()) {
        fs::create_directories(o.out);
        {
            std::ofstream os(fs::path(o.out) / "confusion_matrix.csv");
            write_confusion_csv(os, cm);
        }
        {
            std::ofstream os(fs::path(o.out) / "summary_by_affect.csv");
            write_summary_csv(os, by_affect);
        }
        {
            std::ofstream os(fs::path(o.out) / "summary_by_genre.csv");
            write_summary_csv(os, by_genre);
        }
        {
            std::ofstream os(fs::path(o.out) / "tables.txt");
            os << format_confusion_table(cm) << '\n'
               << format_summary_table(by_affect, "Affective prompt") << '\n'
               << format_summary_table(by_genre, "Genre prompt");
        }
        json agg = {{"other_rule", std::string(to_string(rule))},
                    {"ci_basis", std::string(to_string(basis))},
                    {"valence", {{"overall", va.valence.overall}, {"low", va.valence.low}, {"high", va.valence.high}}},
                    {"arousal", {{"overall", va.arousal.overall}, {"low", va.arousal.low}, {"high", va.arousal.high}}},
                    {"images_majority_matched", majority},
                    {"overall_accuracy", overall_accuracy(ds)},
                    {"responses", ds.responses().size()},
                    {"input", o.csv}};
        write_json(fs::path(o.out) / "aggregates.json", agg);
    }
    return kOk;
}

// ---------------------------------------------------------------------------

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const BackendRegistry& registry = BackendRegistry()) {
    CLI::App app{"Affect-prompted codebook image generation and analysis"};
    app.set_config("--config", "", "Key-value config file (TOML/INI); flags override it");
    app.require_subcommand(1);

    std::string prompt;
    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "Generate one image for a prompt");
    generate->add_option("--prompt", prompt, "Prompt text")->required();
    generate->add_option("--seed", gen.seed, "Seed")->capture_default_str();
    add_generation_flags(generate, gen);

    GenerateOptions ds_opts;
    int workers = 1;
    auto* dataset = app.add_subcommand("dataset", "Generate the 32-image affect x genre dataset");
    dataset->add_option("--seed,--base-seed", ds_opts.seed, "Base seed")->capture_default_str();
    dataset->add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_generation_flags(dataset, ds_opts);

    PaletteOptions pal;
    auto* palette = app.add_subcommand("palette", "15-bin color profiles and rating correlations");
    palette->add_option("images", pal.images, "PNG files");
    palette->add_option("--manifest", pal.manifest, "Dataset manifest.json");
    palette->add_option("--survey", pal.survey, "Survey CSV for rating correlations");
    palette->add_option("--out", pal.out, "Output directory")->envname(kOutEnv)->capture_default_str();
    palette->add_option("--saturation", pal.thresholds.saturation, "Monochrome saturation threshold")
        ->capture_default_str();
    palette->add_option("--white", pal.thresholds.white_value, "White value threshold")
        ->capture_default_str();
    palette->add_option("--black", pal.thresholds.black_value, "Black value threshold")
        ->capture_default_str();
    palette->add_option("--alpha", pal.alpha, "Significance level")->capture_default_str();

    SurveyOptions sv;
    auto* survey = app.add_subcommand("survey", "Confusion matrix and per-group survey tables");
    survey->add_option("--csv", sv.csv, "Survey responses CSV")->required();
    survey->add_option("--manifest", sv.manifest, "Dataset manifest.json (default: canonical order)");
    survey->add_option("--out", sv.out, "Directory for CSV/text tables");
    survey->add_option("--other-rule", sv.other_rule, "Other answers in valence/arousal: wrong|exclude")
        ->capture_default_str();
    survey->add_option("--ci-basis", sv.ci_basis, "CI unit: ratings|images|participants")
        ->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        if (survey->parsed() && !survey->count("--csv"))
            err << "expected CSV schema: " << kSurveyHeader << '\n';
        return kUsageError;
    }

    try {
        if (generate->parsed()) return cmd_generate(prompt, gen, registry, out);
        if (dataset->parsed()) return cmd_dataset(ds_opts, workers, registry, out, err);
        if (palette->parsed()) return cmd_palette(pal, out, err);
        if (survey->parsed()) return cmd_survey(sv, out);
    } catch (const SurveySchemaError& e) {
        err << "validation error: " << e.what() << '\n';
        return kUsageError;
    } catch (const CLI::Error& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::invalid_argument& e) {
        err << "validation error: " << e.what() << '\n';
        return kUsageError;
    } catch (const UnsupportedOperation& e) {
        err << "unsupported: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace emogen::cli
