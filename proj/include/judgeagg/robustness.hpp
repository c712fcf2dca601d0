#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgeagg/aggregators.hpp"
#include "judgeagg/analysis.hpp"
#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/rng.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Persona (label) contamination
// ---------------------------------------------------------------------------

struct ContaminationPattern {
    enum class Kind { SystematicBias, RandomNoise, ScaleCompression };

    Kind kind = Kind::SystematicBias;
    double offset = 0.0;  // SystematicBias, |offset| <= 2
    double sigma = 3.0;   // RandomNoise
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

inline std::string_view contamination_kind_name(ContaminationPattern::Kind kind) {
    switch (kind) {
        case ContaminationPattern::Kind::SystematicBias: return "systematic_bias";
        case ContaminationPattern::Kind::RandomNoise: return "random_noise";
        case ContaminationPattern::Kind::ScaleCompression: return "scale_compression";
    }
    return "systematic_bias";
}

inline ContaminationPattern::Kind contamination_kind_from_name(std::string_view name) {
    if (name == "systematic_bias") return ContaminationPattern::Kind::SystematicBias;
    if (name == "random_noise") return ContaminationPattern::Kind::RandomNoise;
    if (name == "scale_compression") return ContaminationPattern::Kind::ScaleCompression;
    throw ConfigError("unknown contamination kind: " + std::string(name));
}

inline void validate(const ContaminationPattern& pattern) {
    if (pattern.fraction < 0.0 || pattern.fraction > 1.0) {
        throw ConfigError("contamination fraction must lie in [0, 1]");
    }
    if (pattern.kind == ContaminationPattern::Kind::SystematicBias &&
        std::abs(pattern.offset) > 2.0) {
        throw ConfigError("systematic bias offset must lie in [-2, 2]");
    }
}

/// The personas a pattern replaces: floor(fraction * 14) of them, drawn
/// without replacement from the pattern seed alone, so the same annotators
/// are biased on every record.
inline std::vector<PersonaId> contaminated_personas(const ContaminationPattern& pattern,
                                                    std::span<const PersonaId> personas) {
    auto count = static_cast<std::size_t>(
        std::floor(pattern.fraction * static_cast<double>(personas.size())));
    std::vector<PersonaId> pool(personas.begin(), personas.end());
    Rng rng(mix_seed(pattern.seed, "contaminated-personas"));
    rng.shuffle(pool);
    pool.resize(count);
    return pool;
}

/// Replaces the selected personas' scores on one record. Biased annotators
/// still emit the rubric's integer format, so transformed scores are clamped
/// to [0, 10] and re-rounded to the integer grid. Untouched personas pass
/// through bit-identical.
inline std::map<PersonaId, PersonaJudgment> contaminate_persona_scores(
    const std::map<PersonaId, PersonaJudgment>& judgments, const ContaminationPattern& pattern,
    std::span<const PersonaId> personas, std::string_view record_id) {
    validate(pattern);
    auto selected = contaminated_personas(pattern, personas);
    std::map<PersonaId, PersonaJudgment> out = judgments;
    for (PersonaId persona : selected) {
        auto it = out.find(persona);
        if (it == out.end()) continue;
        double score = it->second.score;
        switch (pattern.kind) {
            case ContaminationPattern::Kind::SystematicBias:
                score += pattern.offset;
                break;
            case ContaminationPattern::Kind::RandomNoise: {
                // Noise draws key on (seed, record, persona) so they vary per
                // record while staying reproducible.
                Rng rng(mix_seed(pattern.seed, fnv1a64(record_id),
                                 static_cast<std::uint64_t>(persona)));
                score += rng.gaussian(0.0, pattern.sigma);
                break;
            }
            case ContaminationPattern::Kind::ScaleCompression:
                score = 2.0 + 0.6 * score;  // [0,10] -> [2,8]
                break;
        }
        score = std::clamp(score, 0.0, 10.0);
        it->second.score = static_cast<int>(std::lround(score));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Judge (feature) bias transforms
// ---------------------------------------------------------------------------

struct BiasTransform {
    enum class Kind {
        BottomHeavy,
        TopHeavy,
        MiddleHeavy,
        SystematicShiftPositive,
        SystematicShiftNegative,
    };

    Kind kind = Kind::BottomHeavy;
    double strength = 0.0;  // in [0, 1]; 0 is the identity
    std::vector<JudgeId> target_judges;  // empty = all judges
};

inline constexpr std::array<BiasTransform::Kind, 5> kAllBiasKinds = {
    BiasTransform::Kind::BottomHeavy,
    BiasTransform::Kind::TopHeavy,
    BiasTransform::Kind::MiddleHeavy,
    BiasTransform::Kind::SystematicShiftPositive,
    BiasTransform::Kind::SystematicShiftNegative,
};

inline std::string_view bias_kind_name(BiasTransform::Kind kind) {
    switch (kind) {
        case BiasTransform::Kind::BottomHeavy: return "bottom_heavy";
        case BiasTransform::Kind::TopHeavy: return "top_heavy";
        case BiasTransform::Kind::MiddleHeavy: return "middle_heavy";
        case BiasTransform::Kind::SystematicShiftPositive: return "systematic_shift_positive";
        case BiasTransform::Kind::SystematicShiftNegative: return "systematic_shift_negative";
    }
    return "bottom_heavy";
}

inline BiasTransform::Kind bias_kind_from_name(std::string_view name) {
    for (auto kind : kAllBiasKinds) {
        if (bias_kind_name(kind) == name) return kind;
    }
    throw ConfigError("unknown bias transform: " + std::string(name));
}

/// Order-preserving distortion of one judge score. With u = score / 4 and
/// gamma = 1 + 3 * strength:
///   bottom-heavy    4 * u^gamma          (overly critical)
///   top-heavy       4 * u^(1/gamma)      (overly generous)
///   middle-heavy    2 + (score - 2) * (1 - 0.75 * strength)
///   shifts          clamp(score +- 2 * strength, 0, 4)
/// Everything except a clamped shift is strictly increasing on [0, 4].
inline double bias_transform(double score, BiasTransform::Kind kind, double strength) {
    const double gamma = 1.0 + 3.0 * strength;
    const double u = score / 4.0;
    switch (kind) {
        case BiasTransform::Kind::BottomHeavy: return 4.0 * std::pow(u, gamma);
        case BiasTransform::Kind::TopHeavy: return 4.0 * std::pow(u, 1.0 / gamma);
        case BiasTransform::Kind::MiddleHeavy:
            return 2.0 + (score - 2.0) * (1.0 - 0.75 * strength);
        case BiasTransform::Kind::SystematicShiftPositive:
            return std::clamp(score + 2.0 * strength, 0.0, 4.0);
        case BiasTransform::Kind::SystematicShiftNegative:
            return std::clamp(score - 2.0 * strength, 0.0, 4.0);
    }
    throw ConfigError("unreachable bias kind");
}

inline double bias_transform(double score, const BiasTransform& transform) {
    return bias_transform(score, transform.kind, transform.strength);
}

inline JudgeScoreVector apply_bias_transform(const JudgeScoreVector& features,
                                             const BiasTransform& transform) {
    JudgeScoreVector out = features;
    if (transform.target_judges.empty()) {
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            out[j] = bias_transform(out[j], transform.kind, transform.strength);
        }
    } else {
        for (JudgeId j : transform.target_judges) {
            out[j] = bias_transform(out[j], transform.kind, transform.strength);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Which aggregators a sweep refits. Heuristics never appear in the
/// contamination sweep: they do not train on preference data.
enum class SweepModel { Gam, Mlp, Linear, TenJudgeMean };

inline std::string_view sweep_model_name(SweepModel model) {
    switch (model) {
        case SweepModel::Gam: return "gam";
        case SweepModel::Mlp: return "mlp";
        case SweepModel::Linear: return "linear";
        case SweepModel::TenJudgeMean: return "ten_judge_mean";
    }
    return "gam";
}

inline SweepModel sweep_model_from_name(std::string_view name) {
    if (name == "gam") return SweepModel::Gam;
    if (name == "mlp") return SweepModel::Mlp;
    if (name == "linear") return SweepModel::Linear;
    if (name == "ten_judge_mean") return SweepModel::TenJudgeMean;
    throw ConfigError("unknown sweep model: " + std::string(name));
}

struct SweepPoint {
    std::string arm;    // pattern or transform name
    double axis = 0.0;  // fraction or strength
    std::string model;
    double r2 = 0.0;
};

struct SweepResult {
    std::string axis_name;  // "fraction" or "strength"
    std::vector<SweepPoint> points;
    std::uint64_t seed = 0;
    std::string dataset_id;
};

struct SweepFitConfig {
    GamConfig gam;
    MlpConfig mlp;
};

namespace detail {
inline AggregatorModel fit_sweep_model(SweepModel which, std::span<const LabeledExample> train,
                                       const SweepFitConfig& fit) {
    switch (which) {
        case SweepModel::Gam: return fit_gam(train, fit.gam);
        case SweepModel::Mlp: return fit_mlp(train, fit.mlp);
        case SweepModel::Linear: return fit_linear(train);
        case SweepModel::TenJudgeMean:
            return HeuristicModel{HeuristicKind::ten_judge_mean()};
    }
    throw ConfigError("unreachable sweep model");
}
}  // namespace detail

/// Label-side threat model: contaminate the training records' persona scores,
/// rebuild mixed-persona labels, refit every learned model on the
/// contaminated train split, and score it on the untouched test split.
inline SweepResult run_contamination_sweep(
    std::span<const DatasetRecord> train_records, std::span<const LabeledExample> test,
    std::span<const double> fractions, std::span<const ContaminationPattern::Kind> patterns,
    std::span<const SweepModel> models, std::span<const PersonaId> personas,
    std::uint64_t label_seed, std::uint64_t sweep_seed, const SweepFitConfig& fit) {
    SweepResult result;
    result.axis_name = "fraction";
    result.seed = sweep_seed;
    for (auto kind : patterns) {
        for (double fraction : fractions) {
            ContaminationPattern pattern;
            pattern.kind = kind;
            pattern.offset = 2.0;
            pattern.sigma = 3.0;
            pattern.fraction = fraction;
            pattern.seed = mix_seed(sweep_seed, contamination_kind_name(kind));
            std::vector<DatasetRecord> contaminated(train_records.begin(), train_records.end());
            for (auto& record : contaminated) {
                record.persona_judgments = contaminate_persona_scores(
                    record.persona_judgments, pattern, personas, record.record_id);
            }
            auto labeled = build_labeled_examples(
                contaminated, GroundTruthStrategy::mixed(label_seed), personas);
            for (SweepModel which : models) {
                if (which == SweepModel::TenJudgeMean) continue;  // does not train
                AggregatorModel model = detail::fit_sweep_model(which, labeled, fit);
                result.points.push_back(SweepPoint{std::string(contamination_kind_name(kind)),
                                                   fraction,
                                                   std::string(sweep_model_name(which)),
                                                   evaluate_r2(model, test)});
            }
        }
    }
    return result;
}

/// Judge-side threat model: distort every record's features (train and test
/// both; drifted judges score everything), refit the learned models on the
/// transformed train split, and evaluate all models plus the ten-judge mean
/// against the clean labels. `transform_train` = false restricts the drift
/// to scoring time.
inline SweepResult run_bias_sweep(std::span<const LabeledExample> train,
                                  std::span<const LabeledExample> test,
                                  std::span<const double> strengths,
                                  std::span<const BiasTransform::Kind> transforms,
                                  std::span<const SweepModel> models, std::uint64_t sweep_seed,
                                  const SweepFitConfig& fit, bool transform_train = true) {
    SweepResult result;
    result.axis_name = "strength";
    result.seed = sweep_seed;
    std::vector<LabeledExample> train_t(train.begin(), train.end());
    std::vector<LabeledExample> test_t(test.begin(), test.end());
    for (auto kind : transforms) {
        for (double strength : strengths) {
            BiasTransform transform{kind, strength, {}};
            for (std::size_t i = 0; i < train.size(); ++i) {
                train_t[i].features = transform_train
                                          ? apply_bias_transform(train[i].features, transform)
                                          : train[i].features;
            }
            for (std::size_t i = 0; i < test.size(); ++i) {
                test_t[i].features = apply_bias_transform(test[i].features, transform);
            }
            for (SweepModel which : models) {
                AggregatorModel model = detail::fit_sweep_model(which, train_t, fit);
                result.points.push_back(SweepPoint{std::string(bias_kind_name(kind)), strength,
                                                   std::string(sweep_model_name(which)),
                                                   evaluate_r2(model, test_t)});
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SweepPoint& p) {
    j = nlohmann::json{{"arm", p.arm}, {"axis", p.axis}, {"model", p.model}, {"r2", p.r2}};
}

inline void from_json(const nlohmann::json& j, SweepPoint& p) {
    j.at("arm").get_to(p.arm);
    j.at("axis").get_to(p.axis);
    j.at("model").get_to(p.model);
    j.at("r2").get_to(p.r2);
}

inline void to_json(nlohmann::json& j, const SweepResult& r) {
    j = nlohmann::json{{"axis_name", r.axis_name},
                       {"points", r.points},
                       {"seed", r.seed},
                       {"dataset_id", r.dataset_id}};
}

inline void from_json(const nlohmann::json& j, SweepResult& r) {
    j.at("axis_name").get_to(r.axis_name);
    j.at("points").get_to(r.points);
    j.at("seed").get_to(r.seed);
    j.at("dataset_id").get_to(r.dataset_id);
}

}  // namespace judgeagg
