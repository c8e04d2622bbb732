// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emogen/rng.hpp"

namespace emogen {

enum class Valence { Negative, Positive };
enum class Arousal { Low, High };

/// The four target emotions, one per valence/arousal quadrant.
enum class Affect { Anger = 0, Calmness = 1, Depression = 2, Happiness = 3 };

inline constexpr std::array<Affect, 4> kAffects = {Affect::Anger, Affect::Calmness,
                                                   Affect::Depression, Affect::Happiness};

/// The eight painting-type classes.
enum class Genre {
    Abstract = 0,
    Cityscape,
    GenrePainting,
    Landscape,
    Portrait,
    ReligiousPainting,
    SketchStudy,
    StillLife,
};

inline constexpr std::array<Genre, 8> kGenres = {
    Genre::Abstract,  Genre::Cityscape,         Genre::GenrePainting, Genre::Landscape,
    Genre::Portrait,  Genre::ReligiousPainting, Genre::SketchStudy,   Genre::StillLife,
};

struct AffectInfo {
    std::string_view name;       // lower-case canonical name
    std::string_view label;      // table label
    std::string_view adjective;  // prompt surface form
    Valence valence;
    Arousal arousal;
};

inline constexpr AffectInfo info(Affect a) {
    switch (a) {
        case Affect::Anger: return {"anger", "Anger", "angry", Valence::Negative, Arousal::High};
        case Affect::Calmness: return {"calmness", "Calmness", "calm", Valence::Positive, Arousal::Low};
        case Affect::Depression:
            return {"depression", "Depression", "depressed", Valence::Negative, Arousal::Low};
        case Affect::Happiness:
            return {"happiness", "Happiness", "happy", Valence::Positive, Arousal::High};
    }
    return {"", "", "", Valence::Negative, Arousal::Low};
}

struct GenreInfo {
    std::string_view name;          // class name
    std::string_view slug;          // file-name safe
    std::string_view surface_form;  // text used in prompts
};

inline constexpr GenreInfo info(Genre g) {
    switch (g) {
        case Genre::Abstract: return {"Abstract", "abstract", "abstract painting"};
        case Genre::Cityscape: return {"Cityscape", "cityscape", "cityscape"};
        case Genre::GenrePainting: return {"Genre Painting", "genre-painting", "genre painting"};
        case Genre::Landscape: return {"Landscape", "landscape", "landscape"};
        case Genre::Portrait: return {"Portrait", "portrait", "portrait"};
        case Genre::ReligiousPainting:
            return {"Religious Painting", "religious-painting", "religious painting"};
        case Genre::SketchStudy: return {"Sketch Study", "sketch-study", "sketch and study"};
        case Genre::StillLife: return {"Still Life", "still-life", "still life"};
    }
    return {"", "", ""};
}

/// Case-insensitive lookup of a canonical emotion name ("anger", "Calmness", ...).
inline std::optional<Affect> parse_affect(std::string_view text) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    const std::string t = lower(text);
    for (Affect a : kAffects)
        if (t == info(a).name) return a;
    return std::nullopt;
}

/// Accepts the class name ("Still Life"), the slug or the surface form.
inline std::optional<Genre> parse_genre(std::string_view text) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    const std::string t = lower(text);
    for (Genre g : kGenres) {
        const auto gi = info(g);
        if (t == lower(gi.name) || t == gi.slug || t == gi.surface_form) return g;
    }
    return std::nullopt;
}

/// "A"/"An" + adjective + genre surface form, e.g. "An angry landscape".
inline std::string build_prompt(Affect affect, Genre genre) {
    const auto adj = info(affect).adjective;
    const bool vowel = std::string_view("aeiou").find(adj.front()) != std::string_view::npos;
    std::string out = vowel ? "An " : "A ";
    out += adj;
    out += ' ';
    out += info(genre).surface_form;
    return out;
}

struct PromptSpec {
    Affect affect;
    Genre genre;
    std::string text;
    int index = 0;

    bool operator==(const PromptSpec&) const = default;
};

/// Stable position of an (affect, genre) pair: genre-major, then affect.
constexpr int dataset_index(Affect a, Genre g) {
    return static_cast<int>(g) * 4 + static_cast<int>(a);
}

/// All 32 affect x genre prompts, genre-major then affect, indices 0-31.
inline std::vector<PromptSpec> enumerate_dataset() {
    std::vector<PromptSpec> out;
    out.reserve(32);
    for (Genre g : kGenres)
        for (Affect a : kAffects) out.push_back({a, g, build_prompt(a, g), dataset_index(a, g)});
    return out;
}

/// Seeded presentation order. Specs keep their canonical indices.
inline std::vector<PromptSpec> shuffled_dataset(std::uint64_t seed) {
    auto specs = enumerate_dataset();
    Rng rng(seed);
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = specs.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(specs[i], specs[j]);
    }
    return specs;
}

inline nlohmann::json to_json(const PromptSpec& s) {
    return {
        {"index", s.index},
        {"affect", std::string(info(s.affect).name)},
        {"genre", std::string(info(s.genre).name)},
        {"prompt", s.text},
    };
}

inline PromptSpec prompt_spec_from_json(const nlohmann::json& j) {
    const auto affect = parse_affect(j.at("affect").get<std::string>());
    const auto genre = parse_genre(j.at("genre").get<std::string>());
    if (!affect || !genre) throw std::invalid_argument("prompt spec: unknown affect or genre");
    PromptSpec s{*affect, *genre, j.value("prompt", build_prompt(*affect, *genre)),
                 j.at("index").get<int>()};
    if (s.text.empty()) throw std::invalid_argument("prompt spec: empty prompt text");
    return s;
}

inline nlohmann::json dataset_to_json(const std::vector<PromptSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) arr.push_back(to_json(s));
    return arr;
}

}  // namespace emogen
