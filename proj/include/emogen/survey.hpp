// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "emogen/csv.hpp"
#include "emogen/prompts.hpp"
#include "emogen/scorer.hpp"

namespace emogen {

inline constexpr std::string_view kSurveyHeader =
    "participant_id,image_index,emotion_answer,quality,novelty";

/// Malformed survey input. `row` is the 1-based CSV line (0 when not tied to one).
class SurveySchemaError : public std::invalid_argument {
public:
    SurveySchemaError(const std::string& what, std::size_t row = 0)
        : std::invalid_argument(what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

struct EmotionAnswer {
    std::string original;
    std::optional<Affect> canonical;  // set when the answer names one of the four emotions
    std::string normalized;           // key used for distinct-answer counting

    static EmotionAnswer parse(std::string_view text) {
        EmotionAnswer a;
        a.original = std::string(text);
        const std::string norm = normalize_prompt(text);
        a.canonical = parse_affect(norm);
        a.normalized = a.canonical ? std::string(info(*a.canonical).name) : norm;
        return a;
    }
    bool is_other() const noexcept { return !canonical.has_value(); }
};

struct SurveyResponse {
    std::string participant_id;
    int image_index = 0;
    EmotionAnswer answer;
    int quality = 0;
    int novelty = 0;
    std::size_t row = 0;  // source line, 0 for programmatic responses
};

/// Validated rater responses plus the image -> prompt table they refer to.
class SurveyDataset {
public:
    SurveyDataset(std::vector<SurveyResponse> responses, const std::vector<PromptSpec>& prompts)
        : responses_(std::move(responses)) {
        for (const auto& p : prompts) prompts_[p.index] = p;
        std::map<std::pair<std::string, int>, std::size_t> seen;
        for (const auto& r : responses_) {
            const std::string at = r.row ? " (row " + std::to_string(r.row) + ")" : "";
            if (!prompts_.count(r.image_index))
                throw SurveySchemaError("unknown image_index " + std::to_string(r.image_index) + at,
                                        r.row);
            if (r.quality < 1 || r.quality > 5)
                throw SurveySchemaError("quality must be 1-5" + at, r.row);
            if (r.novelty < 1 || r.novelty > 5)
                throw SurveySchemaError("novelty must be 1-5" + at, r.row);
            if (r.answer.normalized.empty())
                throw SurveySchemaError("empty emotion_answer" + at, r.row);
            auto [it, inserted] = seen.emplace(std::make_pair(r.participant_id, r.image_index), r.row);
            if (!inserted)
                throw SurveySchemaError("duplicate response for participant '" + r.participant_id +
                                            "' and image " + std::to_string(r.image_index) +
                                            " (rows " + std::to_string(it->second) + " and " +
                                            std::to_string(r.row) + ")",
                                        r.row);
        }
    }

    const std::vector<SurveyResponse>& responses() const noexcept { return responses_; }
    const std::map<int, PromptSpec>& prompts() const noexcept { return prompts_; }
    const PromptSpec& prompt(int image_index) const { return prompts_.at(image_index); }
    Affect intended(const SurveyResponse& r) const { return prompts_.at(r.image_index).affect; }
    bool correct(const SurveyResponse& r) const {
        return r.answer.canonical && *r.answer.canonical == intended(r);
    }
    bool empty() const noexcept { return responses_.empty(); }

private:
    std::vector<SurveyResponse> responses_;
    std::map<int, PromptSpec> prompts_;
};

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

inline SurveyDataset parse_survey(std::istream& in,
                                  const std::vector<PromptSpec>& prompts = enumerate_dataset()) {
    const auto records = csv::read(in);
    if (records.empty())
        throw SurveySchemaError("empty survey file; expected header: " + std::string(kSurveyHeader));
    std::vector<std::string> header = records.front().fields;
    for (auto& h : header) h = normalize_prompt(h);
    if (csv::join(header) != kSurveyHeader)
        throw SurveySchemaError("malformed header; expected: " + std::string(kSurveyHeader),
                                records.front().line);

    auto to_int = [](const std::string& s, const char* field, std::size_t row) {
        const std::string t = normalize_prompt(s);
        int v = 0;
        auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || end != t.data() + t.size() || t.empty())
            throw SurveySchemaError(std::string(field) + " is not an integer (row " +
                                        std::to_string(row) + ")",
                                    row);
        return v;
    };

    std::vector<SurveyResponse> responses;
    responses.reserve(records.size() - 1);
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.fields.size() != 5)
            throw SurveySchemaError("expected 5 fields, got " + std::to_string(rec.fields.size()) +
                                        " (row " + std::to_string(rec.line) + ")",
                                    rec.line);
        SurveyResponse r;
        r.row = rec.line;
        r.participant_id = trim(rec.fields[0]);
        if (r.participant_id.empty())
            throw SurveySchemaError("empty participant_id (row " + std::to_string(rec.line) + ")",
                                    rec.line);
        r.image_index = to_int(rec.fields[1], "image_index", rec.line);
        r.answer = EmotionAnswer::parse(rec.fields[2]);
        r.quality = to_int(rec.fields[3], "quality", rec.line);
        r.novelty = to_int(rec.fields[4], "novelty", rec.line);
        responses.push_back(std::move(r));
    }
    return SurveyDataset(std::move(responses), prompts);
}

inline SurveyDataset load_survey(const std::filesystem::path& path,
                                 const std::vector<PromptSpec>& prompts = enumerate_dataset()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_survey: cannot open " + path.string());
    return parse_survey(in, prompts);
}

inline void write_survey_csv(std::ostream& os, const std::vector<SurveyResponse>& responses) {
    os << kSurveyHeader << '\n';
    for (const auto& r : responses)
        os << csv::join({r.participant_id, std::to_string(r.image_index), r.answer.original,
                         std::to_string(r.quality), std::to_string(r.novelty)})
           << '\n';
}

// ---------------------------------------------------------------------------
// Confusion matrix

inline constexpr int kOtherColumn = 4;

/// Rows: intended affect. Columns: the four emotions, then Other.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 5>, 4> counts{};
    std::array<std::size_t, 4> row_totals{};
    /// Row percentages; an affect with no responses has an all-zero row.
    std::array<std::array<double, 5>, 4> percent{};

    double diagonal(Affect a) const {
        const auto i = static_cast<std::size_t>(a);
        return percent[i][i];
    }
};

inline ConfusionMatrix confusion_matrix(const SurveyDataset& ds) {
    if (ds.empty()) throw std::invalid_argument("confusion_matrix: empty dataset");
    ConfusionMatrix cm;
    for (const auto& r : ds.responses()) {
        const auto row = static_cast<std::size_t>(ds.intended(r));
        const auto col = r.answer.canonical ? static_cast<std::size_t>(*r.answer.canonical)
                                            : static_cast<std::size_t>(kOtherColumn);
        ++cm.counts[row][col];
        ++cm.row_totals[row];
    }
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            cm.percent[i][j] =
                cm.row_totals[i] ? 100.0 * static_cast<double>(cm.counts[i][j]) / cm.row_totals[i] : 0.0;
    return cm;
}

// ---------------------------------------------------------------------------
// Per-group summaries

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;  // symmetric 95% t-interval; 0 when n < 2
    std::size_t n = 0;
};

inline MeanCI mean_ci(std::span<const double> values, double confidence = 0.95) {
    MeanCI out;
    out.n = values.size();
    if (values.empty()) throw std::invalid_argument("mean_ci: no values");
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(out.n);
    if (out.n < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double sd = std::sqrt(ss / static_cast<double>(out.n - 1));
    boost::math::students_t dist(static_cast<double>(out.n - 1));
    const double t = boost::math::quantile(dist, 0.5 + confidence / 2.0);
    out.half_width = t * sd / std::sqrt(static_cast<double>(out.n));
    return out;
}

enum class Grouping { Affect, Genre };

/// Unit over which rating CIs are computed.
enum class CiBasis {
    Ratings,           // every individual rating in the group
    ImageMeans,        // one mean rating per image
    ParticipantMeans,  // one mean rating per participant (over the group's images)
};

inline CiBasis parse_ci_basis(std::string_view s) {
    if (s == "ratings") return CiBasis::Ratings;
    if (s == "images") return CiBasis::ImageMeans;
    if (s == "participants") return CiBasis::ParticipantMeans;
    throw std::invalid_argument("unknown CI basis '" + std::string(s) +
                                "' (expected ratings|images|participants)");
}

inline std::string_view to_string(CiBasis b) {
    switch (b) {
        case CiBasis::Ratings: return "ratings";
        case CiBasis::ImageMeans: return "images";
        case CiBasis::ParticipantMeans: return "participants";
    }
    return "";
}

struct GroupSummary {
    std::string group;
    std::size_t responses = 0;
    std::size_t images = 0;
    double accuracy = 0.0;        // percent of responses naming the intended affect
    double unique_answers = 0.0;  // mean distinct normalized answers per image
    MeanCI quality;
    MeanCI novelty;
};

inline std::string group_key(const PromptSpec& s, Grouping g) {
    return g == Grouping::Affect ? std::string(info(s.affect).label) : std::string(info(s.genre).name);
}

inline std::vector<std::string> group_order(Grouping g) {
    std::vector<std::string> out;
    if (g == Grouping::Affect)
        for (Affect a : kAffects) out.emplace_back(info(a).label);
    else
        for (Genre ge : kGenres) out.emplace_back(info(ge).name);
    return out;
}

/// Groups appear in canonical order; groups without responses are omitted.
inline std::vector<GroupSummary> per_group_summary(const SurveyDataset& ds, Grouping grouping,
                                                   CiBasis basis = CiBasis::Ratings) {
    if (ds.empty()) throw std::invalid_argument("per_group_summary: empty dataset");
    std::vector<GroupSummary> out;
    for (const auto& key : group_order(grouping)) {
        std::vector<const SurveyResponse*> rs;
        for (const auto& r : ds.responses())
            if (group_key(ds.prompt(r.image_index), grouping) == key) rs.push_back(&r);
        if (rs.empty()) continue;

        GroupSummary gs;
        gs.group = key;
        gs.responses = rs.size();
        std::size_t correct = 0;
        std::map<int, std::set<std::string>> answers_by_image;
        std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_image;
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_participant;
        std::vector<double> quality, novelty;
        for (const auto* r : rs) {
            correct += ds.correct(*r) ? 1 : 0;
            answers_by_image[r->image_index].insert(r->answer.normalized);
            quality.push_back(r->quality);
            novelty.push_back(r->novelty);
            by_image[r->image_index].first.push_back(r->quality);
            by_image[r->image_index].second.push_back(r->novelty);
            by_participant[r->participant_id].first.push_back(r->quality);
            by_participant[r->participant_id].second.push_back(r->novelty);
        }
        gs.images = answers_by_image.size();
        gs.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(rs.size());
        double distinct = 0.0;
        for (const auto& [img, set] : answers_by_image) distinct += static_cast<double>(set.size());
        gs.unique_answers = distinct / static_cast<double>(gs.images);

        auto means_of = [](const auto& groups, bool first) {
            std::vector<double> out;
            for (const auto& [k, v] : groups) {
                const auto& xs = first ? v.first : v.second;
                double s = 0.0;
                for (double x : xs) s += x;
                out.push_back(s / static_cast<double>(xs.size()));
            }
            return out;
        };
        switch (basis) {
            case CiBasis::Ratings:
                gs.quality = mean_ci(quality);
                gs.novelty = mean_ci(novelty);
                break;
            case CiBasis::ImageMeans:
                gs.quality = mean_ci(means_of(by_image, true));
                gs.novelty = mean_ci(means_of(by_image, false));
                break;
            case CiBasis::ParticipantMeans:
                gs.quality = mean_ci(means_of(by_participant, true));
                gs.novelty = mean_ci(means_of(by_participant, false));
                break;
        }
        out.push_back(std::move(gs));
    }
    return out;
}

/// Percent of all responses that name the intended affect.
inline double overall_accuracy(const SurveyDataset& ds) {
    if (ds.empty()) throw std::invalid_argument("overall_accuracy: empty dataset");
    std::size_t correct = 0;
    for (const auto& r : ds.responses()) correct += ds.correct(r) ? 1 : 0;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(ds.responses().size());
}

// ---------------------------------------------------------------------------
// Valence / arousal aggregation

enum class OtherRule {
    CountAsWrong,  // Other answers stay in the denominator
    Exclude,       // Other answers are dropped
};

inline OtherRule parse_other_rule(std::string_view s) {
    if (s == "wrong") return OtherRule::CountAsWrong;
    if (s == "exclude") return OtherRule::Exclude;
    throw std::invalid_argument("unknown Other rule '" + std::string(s) + "' (expected wrong|exclude)");
}

inline std::string_view to_string(OtherRule r) {
    return r == OtherRule::CountAsWrong ? "wrong" : "exclude";
}

struct AxisAccuracy {
    double overall = 0.0;  // percent; NaN when nothing was counted
    double low = 0.0;      // prompts on the low/negative side
    double high = 0.0;     // prompts on the high/positive side
};

struct ValenceArousalSummary {
    OtherRule rule = OtherRule::CountAsWrong;
    AxisAccuracy valence;  // low = negative valence prompts
    AxisAccuracy arousal;
};

/// How often the answer lands on the intended side of each circumplex axis.
inline ValenceArousalSummary valence_arousal_summary(const SurveyDataset& ds,
                                                     OtherRule rule = OtherRule::CountAsWrong) {
    if (ds.empty()) throw std::invalid_argument("valence_arousal_summary: empty dataset");
    // [axis][side] -> (hits, total)
    std::array<std::array<std::pair<std::size_t, std::size_t>, 2>, 2> tally{};
    for (const auto& r : ds.responses()) {
        if (r.answer.is_other() && rule == OtherRule::Exclude) continue;
        const auto want = info(ds.intended(r));
        const std::size_t v_side = want.valence == Valence::Positive ? 1 : 0;
        const std::size_t a_side = want.arousal == Arousal::High ? 1 : 0;
        ++tally[0][v_side].second;
        ++tally[1][a_side].second;
        if (r.answer.canonical) {
            const auto got = info(*r.answer.canonical);
            if (got.valence == want.valence) ++tally[0][v_side].first;
            if (got.arousal == want.arousal) ++tally[1][a_side].first;
        }
    }
    auto pct = [](std::size_t hit, std::size_t total) {
        return total ? 100.0 * static_cast<double>(hit) / static_cast<double>(total) : std::nan("");
    };
    auto axis = [&](std::size_t a) {
        const auto& t = tally[a];
        return AxisAccuracy{pct(t[0].first + t[1].first, t[0].second + t[1].second),
                            pct(t[0].first, t[0].second), pct(t[1].first, t[1].second)};
    };
    return {rule, axis(0), axis(1)};
}

/// Percent of images (with at least one response) whose responses name the
/// intended affect at least half of the time.
inline double images_majority_matched(const SurveyDataset& ds) {
    if (ds.empty()) throw std::invalid_argument("images_majority_matched: empty dataset");
    std::map<int, std::pair<std::size_t, std::size_t>> per_image;
    for (const auto& r : ds.responses()) {
        auto& [hit, total] = per_image[r.image_index];
        hit += ds.correct(r) ? 1 : 0;
        ++total;
    }
    std::size_t matched = 0;
    for (const auto& [img, ht] : per_image) matched += 2 * ht.first >= ht.second ? 1 : 0;
    return 100.0 * static_cast<double>(matched) / static_cast<double>(per_image.size());
}

// ---------------------------------------------------------------------------
// Table output

namespace detail {

inline std::string pct_int(double v) { return std::to_string(std::lround(v)) + "%"; }

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string aligned(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        width.resize(std::max(width.size(), row.size()), 0);
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    std::ostringstream os;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::string line;
        for (std::size_t i = 0; i < rows[r].size(); ++i) {
            if (i) line += " | ";
            std::string cell = rows[r][i];
            cell.resize(width[i], ' ');
            line += cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        os << line << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 3 : 0);
            os << std::string(total, '=') << '\n';
        }
    }
    return os.str();
}

}  // namespace detail

inline std::vector<std::string> confusion_columns() {
    std::vector<std::string> cols;
    for (Affect a : kAffects) cols.emplace_back(info(a).label);
    cols.emplace_back("Other");
    return cols;
}

/// Integer-rounded row percentages, one row per intended affect.
inline std::string format_confusion_table(const ConfusionMatrix& cm) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{""};
    for (auto& c : confusion_columns()) head.push_back(c);
    rows.push_back(head);
    for (Affect a : kAffects) {
        std::vector<std::string> row{std::string(info(a).label)};
        for (double v : cm.percent[static_cast<std::size_t>(a)]) row.push_back(detail::pct_int(v));
        rows.push_back(std::move(row));
    }
    return detail::aligned(rows);
}

inline void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm) {
    std::vector<std::string> head{"intended"};
    for (auto& c : confusion_columns()) {
        head.push_back(c + "_pct");
    }
    for (auto& c : confusion_columns()) head.push_back(c + "_count");
    os << csv::join(head) << '\n';
    for (Affect a : kAffects) {
        const auto i = static_cast<std::size_t>(a);
        std::vector<std::string> row{std::string(info(a).label)};
        for (double v : cm.percent[i]) row.push_back(csv::number(v));
        for (auto c : cm.counts[i]) row.push_back(std::to_string(c));
        os << csv::join(row) << '\n';
    }
}

inline std::string format_summary_table(const std::vector<GroupSummary>& groups,
                                        std::string_view group_title) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({std::string(group_title), "accuracy", "un. answers", "quality", "novelty"});
    for (const auto& g : groups)
        rows.push_back({g.group, detail::pct_int(g.accuracy), detail::fixed(g.unique_answers, 1),
                        detail::fixed(g.quality.mean, 2) + "+-" + detail::fixed(g.quality.half_width, 2),
                        detail::fixed(g.novelty.mean, 2) + "+-" +
                            detail::fixed(g.novelty.half_width, 2)});
    return detail::aligned(rows);
}

inline void write_summary_csv(std::ostream& os, const std::vector<GroupSummary>& groups) {
    os << "group,responses,images,accuracy_pct,unique_answers,quality_mean,quality_ci95,"
          "novelty_mean,novelty_ci95\n";
    for (const auto& g : groups)
        os << csv::join({g.group, std::to_string(g.responses), std::to_string(g.images),
                         csv::number(g.accuracy), csv::number(g.unique_answers),
                         csv::number(g.quality.mean), csv::number(g.quality.half_width),
                         csv::number(g.novelty.mean), csv::number(g.novelty.half_width)})
           << '\n';
}

}  // namespace emogen
