#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/gam.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/linear.hpp"
#include "judgeagg/metrics.hpp"
#include "judgeagg/mlp.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Heuristic baselines
// ---------------------------------------------------------------------------

/// Judge scores live on [0, 4] and preferences on [0, 10]; heuristics bridge
/// the two with this fixed linear scaling.
inline constexpr double kHeuristicScale = kPreferenceMax / kJudgeScoreMax;

/// The four rubric dimensions native to the UltraFeedback dataset.
inline constexpr std::array<JudgeId, 4> kUltraFeedbackJudges = {
    JudgeId::Truthfulness, JudgeId::Helpfulness, JudgeId::Honesty,
    JudgeId::InstructionFollowing};

struct HeuristicKind {
    enum class Type { TenJudgeMean, BestSingleJudge, UltraFeedbackFour };
    Type type = Type::TenJudgeMean;
    JudgeId judge = JudgeId::Truthfulness;  // BestSingleJudge only

    static HeuristicKind ten_judge_mean() { return {Type::TenJudgeMean, JudgeId::Truthfulness}; }
    static HeuristicKind best_single(JudgeId judge) { return {Type::BestSingleJudge, judge}; }
    static HeuristicKind ultrafeedback_four() {
        return {Type::UltraFeedbackFour, JudgeId::Truthfulness};
    }
};

inline double heuristic_aggregate(const HeuristicKind& kind, const JudgeScoreVector& features) {
    switch (kind.type) {
        case HeuristicKind::Type::TenJudgeMean: {
            double sum = 0.0;
            for (std::size_t j = 0; j < kNumJudges; ++j) sum += features[j];
            return sum / static_cast<double>(kNumJudges) * kHeuristicScale;
        }
        case HeuristicKind::Type::UltraFeedbackFour: {
            double sum = 0.0;
            for (JudgeId j : kUltraFeedbackJudges) sum += features[j];
            return sum / static_cast<double>(kUltraFeedbackJudges.size()) * kHeuristicScale;
        }
        case HeuristicKind::Type::BestSingleJudge:
            return features[kind.judge] * kHeuristicScale;
    }
    throw ConfigError("unreachable heuristic kind");
}

/// The judge whose scaled score best explains the training labels; ties break
/// toward canonical judge order.
inline JudgeId select_best_judge(std::span<const LabeledExample> train) {
    if (train.empty()) throw InsufficientData("select_best_judge needs a non-empty training set");
    std::vector<double> labels;
    labels.reserve(train.size());
    for (const auto& ex : train) labels.push_back(ex.label);
    JudgeId best = JudgeId::Truthfulness;
    double best_r2 = -std::numeric_limits<double>::infinity();
    std::vector<double> preds(train.size());
    for (JudgeId judge : kAllJudges) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            preds[i] = train[i].features[judge] * kHeuristicScale;
        }
        double r2 = r_squared(labels, preds);
        if (r2 > best_r2) {
            best_r2 = r2;
            best = judge;
        }
    }
    return best;
}

struct HeuristicModel {
    HeuristicKind kind;

    double predict(const JudgeScoreVector& features) const {
        return heuristic_aggregate(kind, features);
    }
};

// ---------------------------------------------------------------------------
// The aggregator union
// ---------------------------------------------------------------------------

using AggregatorModel = std::variant<GamModel, MlpModel, LinearModel, HeuristicModel>;

/// Deterministic scalar prediction. Raw regression output: not clamped to
/// [0, 10]; clamping is a reporting concern.
inline double predict(const AggregatorModel& model, const JudgeScoreVector& features) {
    return std::visit([&](const auto& m) { return m.predict(features); }, model);
}

inline std::vector<double> predict_all(const AggregatorModel& model,
                                       std::span<const LabeledExample> examples) {
    std::vector<double> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(predict(model, ex.features));
    return out;
}

inline double evaluate_r2(const AggregatorModel& model, std::span<const LabeledExample> test) {
    std::vector<double> labels;
    labels.reserve(test.size());
    for (const auto& ex : test) labels.push_back(ex.label);
    return r_squared(labels, predict_all(model, test));
}

// ---------------------------------------------------------------------------
// Serialization: self-describing documents keyed by model kind
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const HeuristicKind& k) {
    switch (k.type) {
        case HeuristicKind::Type::TenJudgeMean:
            j = nlohmann::json{{"type", "ten_judge_mean"}};
            return;
        case HeuristicKind::Type::UltraFeedbackFour:
            j = nlohmann::json{{"type", "ultrafeedback_four"}};
            return;
        case HeuristicKind::Type::BestSingleJudge:
            j = nlohmann::json{{"type", "best_single_judge"}, {"judge", judge_name(k.judge)}};
            return;
    }
}

inline void from_json(const nlohmann::json& j, HeuristicKind& k) {
    auto type = j.at("type").get<std::string>();
    if (type == "ten_judge_mean") {
        k = HeuristicKind::ten_judge_mean();
    } else if (type == "ultrafeedback_four") {
        k = HeuristicKind::ultrafeedback_four();
    } else if (type == "best_single_judge") {
        k = HeuristicKind::best_single(judge_from_name(j.at("judge").get<std::string>()));
    } else {
        throw ConfigError("unknown heuristic type: " + type);
    }
}

inline void to_json(nlohmann::json& j, const HeuristicModel& m) {
    j = nlohmann::json{{"kind", m.kind}};
}

inline void from_json(const nlohmann::json& j, HeuristicModel& m) {
    j.at("kind").get_to(m.kind);
}

inline nlohmann::json serialize_model(const AggregatorModel& model) {
    return std::visit(
        [](const auto& m) -> nlohmann::json {
            using T = std::decay_t<decltype(m)>;
            const char* kind = nullptr;
            if constexpr (std::is_same_v<T, GamModel>) kind = "gam";
            if constexpr (std::is_same_v<T, MlpModel>) kind = "mlp";
            if constexpr (std::is_same_v<T, LinearModel>) kind = "linear";
            if constexpr (std::is_same_v<T, HeuristicModel>) kind = "heuristic";
            return nlohmann::json{{"kind", kind}, {"model", m}};
        },
        model);
}

inline AggregatorModel deserialize_model(const nlohmann::json& j) {
    auto kind = j.at("kind").get<std::string>();
    if (kind == "gam") return j.at("model").get<GamModel>();
    if (kind == "mlp") return j.at("model").get<MlpModel>();
    if (kind == "linear") return j.at("model").get<LinearModel>();
    if (kind == "heuristic") return j.at("model").get<HeuristicModel>();
    throw ConfigError("unknown model kind: " + kind);
}

}  // namespace judgeagg
