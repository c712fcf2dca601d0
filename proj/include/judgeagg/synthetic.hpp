#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/rng.hpp"

namespace judgeagg {

/// Seeded synthetic dataset: additive (or linear) ground truth driving both a
/// continuous external label and fourteen integer persona judgments, plus iid
/// judge noise features. Everything downstream of the LLM stages can be
/// exercised offline against the known generating functions.
struct SyntheticSpec {
    enum class Kind { Linear, Additive };

    Kind kind = Kind::Additive;
    std::size_t n = 2000;
    std::uint64_t seed = 7;
    double noise_sigma = 0.5;   // gaussian noise on the external label
    double score_lo = 0.2;      // judge score support
    double score_hi = 3.8;
    double label_scale = 1.0;   // amplitude of the truth around label_center
    double label_center = 5.0;  // mean preference value of the truth
    double persona_noise = 0.8; // per-judgment persona noise (before rounding)
};

inline std::string_view synthetic_kind_name(SyntheticSpec::Kind kind) {
    return kind == SyntheticSpec::Kind::Linear ? "linear" : "additive";
}

inline SyntheticSpec::Kind synthetic_kind_from_name(std::string_view name) {
    if (name == "linear") return SyntheticSpec::Kind::Linear;
    if (name == "additive") return SyntheticSpec::Kind::Additive;
    throw ConfigError("unknown synthetic kind: " + std::string(name));
}

/// Raw weights of the linear truth before label_scale is applied.
inline constexpr std::array<double, kNumJudges> kLinearTruthWeights = {
    0.45, 0.40, 0.35, 0.30, 0.25, 0.20, 0.18, 0.14, 0.10, 0.08};

/// Judges that actually drive the additive truth.
inline constexpr std::array<std::size_t, 3> kAdditiveInformativeJudges = {0, 1, 2};

namespace detail {

inline double additive_raw_term(std::size_t judge, double s, double mid) {
    switch (judge) {
        case 0: return 1.5 * std::tanh(1.2 * (s - mid));
        case 1: return 0.28 * (s - mid) * (s - mid);
        case 2: return 0.5 * s;
        default: return 0.0;
    }
}

inline double additive_raw_mean(std::size_t judge, const SyntheticSpec& spec) {
    const double mid = 0.5 * (spec.score_lo + spec.score_hi);
    const double width = spec.score_hi - spec.score_lo;
    switch (judge) {
        case 0: return 0.0;  // odd around the midpoint
        case 1: return 0.28 * width * width / 12.0;
        case 2: return 0.5 * mid;
        default: return 0.0;
    }
}

}  // namespace detail

/// Centered contribution of one judge to the additive truth; the oracle the
/// GAM's fitted terms are checked against.
inline double additive_truth_term(const SyntheticSpec& spec, std::size_t judge, double s) {
    const double mid = 0.5 * (spec.score_lo + spec.score_hi);
    return spec.label_scale *
           (detail::additive_raw_term(judge, s, mid) - detail::additive_raw_mean(judge, spec));
}

/// Effective weights of the linear truth (label_scale folded in).
inline std::array<double, kNumJudges> linear_truth_weights(const SyntheticSpec& spec) {
    std::array<double, kNumJudges> w{};
    for (std::size_t j = 0; j < kNumJudges; ++j) w[j] = spec.label_scale * kLinearTruthWeights[j];
    return w;
}

/// Intercept pairing with linear_truth_weights so the truth is centered at
/// label_center.
inline double linear_truth_intercept(const SyntheticSpec& spec) {
    const double mid = 0.5 * (spec.score_lo + spec.score_hi);
    double weighted_mid = 0.0;
    for (double w : kLinearTruthWeights) weighted_mid += w * mid;
    return spec.label_center - spec.label_scale * weighted_mid;
}

/// Noise-free preference value for a feature vector.
inline double synthetic_truth(const SyntheticSpec& spec, const JudgeScoreVector& features) {
    if (spec.kind == SyntheticSpec::Kind::Linear) {
        double y = linear_truth_intercept(spec);
        auto w = linear_truth_weights(spec);
        for (std::size_t j = 0; j < kNumJudges; ++j) y += w[j] * features[j];
        return y;
    }
    double y = spec.label_center;
    for (std::size_t j : kAdditiveInformativeJudges) {
        y += additive_truth_term(spec, j, features[j]);
    }
    return y;
}

inline std::vector<DatasetRecord> generate_synthetic_records(const SyntheticSpec& spec) {
    if (!(spec.score_hi > spec.score_lo)) throw ConfigError("synthetic score range is empty");
    if (spec.n == 0) throw ConfigError("synthetic dataset size must be positive");
    std::vector<DatasetRecord> records;
    records.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Rng rng(mix_seed(spec.seed, "synthetic-record", i));
        DatasetRecord record;
        record.record_id = "syn-" + std::to_string(spec.seed) + "-" + std::to_string(i);
        record.prompt = "synthetic prompt " + std::to_string(i);
        record.answer = "synthetic answer " + std::to_string(i);
        JudgeScoreVector features;
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            features[j] = rng.uniform(spec.score_lo, spec.score_hi);
        }
        record.judge_scores = features;
        const double truth = synthetic_truth(spec, features);
        record.external_label =
            std::clamp(truth + rng.gaussian(0.0, spec.noise_sigma), 0.0, 10.0);
        for (std::size_t p = 0; p < kNumPersonas; ++p) {
            // Personas share the truth but disagree through a fixed per-persona
            // offset plus idiosyncratic noise, then emit the integer grid.
            const double bias =
                0.8 * (static_cast<double>(p) - 6.5) / 6.5;
            double score = truth + bias + rng.gaussian(0.0, spec.persona_noise);
            score = std::clamp(score, 0.0, 10.0);
            PersonaJudgment judgment;
            judgment.persona = static_cast<PersonaId>(p);
            judgment.analysis = "synthetic judgment";
            judgment.score = static_cast<int>(std::lround(score));
            record.persona_judgments[judgment.persona] = judgment;
        }
        records.push_back(std::move(record));
    }
    return records;
}

/// Records labeled with their exact (noisy) external labels; the standard
/// oracle dataset for the learned aggregators.
inline std::vector<LabeledExample> generate_synthetic_examples(const SyntheticSpec& spec) {
    auto records = generate_synthetic_records(spec);
    return build_labeled_examples(records, GroundTruthStrategy::external(), kAllPersonas);
}

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"kind", synthetic_kind_name(s.kind)},
                       {"n", s.n},
                       {"seed", s.seed},
                       {"noise_sigma", s.noise_sigma},
                       {"score_lo", s.score_lo},
                       {"score_hi", s.score_hi},
                       {"label_scale", s.label_scale},
                       {"label_center", s.label_center},
                       {"persona_noise", s.persona_noise}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.kind = synthetic_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("n")) j.at("n").get_to(s.n);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
    if (j.contains("noise_sigma")) j.at("noise_sigma").get_to(s.noise_sigma);
    if (j.contains("score_lo")) j.at("score_lo").get_to(s.score_lo);
    if (j.contains("score_hi")) j.at("score_hi").get_to(s.score_hi);
    if (j.contains("label_scale")) j.at("label_scale").get_to(s.label_scale);
    if (j.contains("label_center")) j.at("label_center").get_to(s.label_center);
    if (j.contains("persona_noise")) j.at("persona_noise").get_to(s.persona_noise);
}

}  // namespace judgeagg
