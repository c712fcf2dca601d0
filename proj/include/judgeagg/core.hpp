#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace judgeagg {

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

/// The ten rubric judges, in canonical order. Score vectors are indexed by
/// this order, so it must never change.
enum class JudgeId : std::size_t {
    Truthfulness = 0,
    Harmlessness,
    Helpfulness,
    Honesty,
    ExplanatoryDepth,
    InstructionFollowing,
    Clarity,
    Conciseness,
    LogicalConsistency,
    Creativity,
};

inline constexpr std::size_t kNumJudges = 10;

inline constexpr std::array<JudgeId, kNumJudges> kAllJudges = {
    JudgeId::Truthfulness,       JudgeId::Harmlessness,
    JudgeId::Helpfulness,        JudgeId::Honesty,
    JudgeId::ExplanatoryDepth,   JudgeId::InstructionFollowing,
    JudgeId::Clarity,            JudgeId::Conciseness,
    JudgeId::LogicalConsistency, JudgeId::Creativity,
};

inline constexpr std::array<std::string_view, kNumJudges> kJudgeNames = {
    "truthfulness",      "harmlessness", "helpfulness", "honesty",
    "explanatory-depth", "instruction-following", "clarity",
    "conciseness",       "logical-consistency",   "creativity",
};

inline constexpr std::array<std::string_view, kNumJudges> kJudgeVersionTags = {
    "TRUTHFULNESS-JUDGE-v1.0",
    "HARMLESSNESS-JUDGE-v1.0",
    "HELPFULNESS-JUDGE-v1.0",
    "HONESTY-JUDGE-v1.0",
    "EXPLANATORY-DEPTH-JUDGE-v1.0",
    "INSTRUCTION-FOLLOWING-JUDGE-v1.0",
    "CLARITY-JUDGE-v1.0",
    "CONCISENESS-JUDGE-v1.0",
    "LOGICAL-CONSISTENCY-JUDGE-v1.0",
    "CREATIVITY-JUDGE-v1.0",
};

inline constexpr std::string_view judge_name(JudgeId id) {
    return kJudgeNames[static_cast<std::size_t>(id)];
}

inline constexpr std::string_view judge_version_tag(JudgeId id) {
    return kJudgeVersionTags[static_cast<std::size_t>(id)];
}

inline std::optional<JudgeId> try_judge_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumJudges; ++i) {
        if (kJudgeNames[i] == name) return static_cast<JudgeId>(i);
    }
    return std::nullopt;
}

/// The judge enumeration is closed: unknown names are an error, not a new judge.
inline JudgeId judge_from_name(std::string_view name) {
    if (auto id = try_judge_from_name(name)) return *id;
    throw std::invalid_argument("unknown judge: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Personas
// ---------------------------------------------------------------------------

/// The fourteen simulated annotators used for preference synthesis.
enum class PersonaId : std::size_t {
    Professor = 0,
    Ceo,
    Parent,
    Student,
    DataScientist,
    Therapist,
    Child,
    Ethicist,
    PrivacyAdvocate,
    Skeptic,
    Engineer,
    Novelist,
    NonNativeSpeaker,
    Lawyer,
};

inline constexpr std::size_t kNumPersonas = 14;

inline constexpr std::array<PersonaId, kNumPersonas> kAllPersonas = {
    PersonaId::Professor, PersonaId::Ceo,      PersonaId::Parent,
    PersonaId::Student,   PersonaId::DataScientist, PersonaId::Therapist,
    PersonaId::Child,     PersonaId::Ethicist, PersonaId::PrivacyAdvocate,
    PersonaId::Skeptic,   PersonaId::Engineer, PersonaId::Novelist,
    PersonaId::NonNativeSpeaker, PersonaId::Lawyer,
};

inline constexpr std::array<std::string_view, kNumPersonas> kPersonaNames = {
    "Professor", "CEO",      "Parent",   "Student",
    "Data Scientist", "Therapist", "Child", "Ethicist",
    "Privacy Advocate", "Skeptic", "Engineer", "Novelist",
    "Non-native Speaker", "Lawyer",
};

inline constexpr std::array<std::string_view, kNumPersonas> kPersonaBios = {
    "Values intellectual rigor, proper argumentation, logical consistency, and "
    "educational value in explanations.",
    "Prefers conciseness, practical solutions, strategic thinking, and clear "
    "action items that drive results.",
    "Prioritizes safety, age-appropriate content, clear explanations, and "
    "practical everyday advice.",
    "Seeks clear step-by-step explanations, examples, study tips, and help "
    "understanding difficult concepts.",
    "Emphasizes accuracy, statistical rigor, code quality, reproducibility, and "
    "evidence-based reasoning.",
    "Values empathy, emotional intelligence, non-judgmental language, and "
    "supportive communication.",
    "Ages 8-12; prefers simplicity, fun explanations, relatable examples, and "
    "encouraging language.",
    "Focuses on ethical reasoning, consequences, fairness, and philosophical "
    "grounding.",
    "Prioritizes data minimization, security awareness, anonymity, and privacy "
    "protection.",
    "Demands evidence, spots logical fallacies, maintains healthy doubt, and "
    "verifies claims.",
    "Values precision, implementation details, efficiency, and systematic "
    "debugging approaches.",
    "Enjoys vivid description, emotional depth, narrative flow, and imaginative "
    "approaches.",
    "Needs clear language, avoids idioms, requests cultural context, and "
    "simplified vocabulary.",
    "Requires precise language, edge-case consideration, risk assessment, and "
    "precedent awareness.",
};

inline constexpr std::string_view persona_name(PersonaId id) {
    return kPersonaNames[static_cast<std::size_t>(id)];
}

inline constexpr std::string_view persona_bio(PersonaId id) {
    return kPersonaBios[static_cast<std::size_t>(id)];
}

inline std::optional<PersonaId> try_persona_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumPersonas; ++i) {
        if (kPersonaNames[i] == name) return static_cast<PersonaId>(i);
    }
    return std::nullopt;
}

inline PersonaId persona_from_name(std::string_view name) {
    if (auto id = try_persona_from_name(name)) return *id;
    throw std::invalid_argument("unknown persona: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Scores and records
// ---------------------------------------------------------------------------

inline constexpr double kJudgeScoreMin = 0.0;
inline constexpr double kJudgeScoreMax = 4.0;
inline constexpr double kPreferenceMin = 0.0;
inline constexpr double kPreferenceMax = 10.0;

/// The per-judge rubric scores for one record, indexed by canonical JudgeId
/// order. Stored as binary64 even though the rubric emits one decimal place:
/// bias transforms and standardization need the full precision.
struct JudgeScoreVector {
    std::array<double, kNumJudges> scores{};

    double& operator[](JudgeId id) { return scores[static_cast<std::size_t>(id)]; }
    double operator[](JudgeId id) const { return scores[static_cast<std::size_t>(id)]; }
    double& operator[](std::size_t i) { return scores[i]; }
    double operator[](std::size_t i) const { return scores[i]; }

    bool operator==(const JudgeScoreVector&) const = default;
};

/// One persona's verdict: a short free-text rationale and an integer score.
/// The analysis text is retained for audit but never used numerically.
struct PersonaJudgment {
    PersonaId persona = PersonaId::Professor;
    std::string analysis;
    int score = 0;

    bool operator==(const PersonaJudgment&) const = default;
};

/// One (prompt, answer) pair plus whatever scoring stages have produced so
/// far. Missing stages are explicit optionals, never sentinel values, so
/// downstream code can distinguish "not scored" from "scored 0".
struct DatasetRecord {
    std::string record_id;
    std::string prompt;
    std::string answer;
    std::optional<JudgeScoreVector> judge_scores;
    std::map<PersonaId, PersonaJudgment> persona_judgments;
    std::optional<double> external_label;

    bool operator==(const DatasetRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A violated invariant. Violations are data, not failures: callers decide
/// whether to skip, log, or abort.
struct Violation {
    std::string field;
    std::string rule;
};

inline std::vector<Violation> validate_record(const DatasetRecord& record) {
    std::vector<Violation> out;
    if (record.record_id.empty()) out.push_back({"record_id", "must be non-empty"});
    if (record.prompt.empty()) out.push_back({"prompt", "must be non-empty"});
    if (record.answer.empty()) out.push_back({"answer", "must be non-empty"});
    if (record.judge_scores) {
        for (std::size_t i = 0; i < kNumJudges; ++i) {
            double v = record.judge_scores->scores[i];
            if (!std::isfinite(v) || v < kJudgeScoreMin || v > kJudgeScoreMax) {
                out.push_back({std::string("judge_scores.") + std::string(kJudgeNames[i]),
                               "JudgeScore must lie in [0.0, 4.0]"});
            }
        }
    }
    for (const auto& [id, judgment] : record.persona_judgments) {
        if (judgment.persona != id) {
            out.push_back({std::string("persona_judgments.") + std::string(persona_name(id)),
                           "map key must match judgment persona"});
        }
        if (judgment.score < 0 || judgment.score > 10) {
            out.push_back({std::string("persona_judgments.") + std::string(persona_name(id)),
                           "PersonaJudgment score must lie in {0,...,10}"});
        }
    }
    if (record.external_label && !std::isfinite(*record.external_label)) {
        out.push_back({"external_label", "must be finite"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization (round-trip exact)
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const JudgeScoreVector& v) {
    j = v.scores;
}

inline void from_json(const nlohmann::json& j, JudgeScoreVector& v) {
    j.get_to(v.scores);
}

inline void to_json(nlohmann::json& j, const PersonaJudgment& p) {
    j = nlohmann::json{{"persona", persona_name(p.persona)},
                       {"analysis", p.analysis},
                       {"score", p.score}};
}

inline void from_json(const nlohmann::json& j, PersonaJudgment& p) {
    p.persona = persona_from_name(j.at("persona").get<std::string>());
    j.at("analysis").get_to(p.analysis);
    j.at("score").get_to(p.score);
}

inline void to_json(nlohmann::json& j, const DatasetRecord& r) {
    j = nlohmann::json{{"record_id", r.record_id},
                       {"prompt", r.prompt},
                       {"answer", r.answer}};
    if (r.judge_scores) j["judge_scores"] = *r.judge_scores;
    if (!r.persona_judgments.empty()) {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [id, judgment] : r.persona_judgments) {
            m[std::string(persona_name(id))] = judgment;
        }
        j["persona_judgments"] = std::move(m);
    }
    if (r.external_label) j["external_label"] = *r.external_label;
}

inline void from_json(const nlohmann::json& j, DatasetRecord& r) {
    j.at("record_id").get_to(r.record_id);
    j.at("prompt").get_to(r.prompt);
    j.at("answer").get_to(r.answer);
    r.judge_scores.reset();
    r.persona_judgments.clear();
    r.external_label.reset();
    if (j.contains("judge_scores")) r.judge_scores = j.at("judge_scores").get<JudgeScoreVector>();
    if (j.contains("persona_judgments")) {
        for (const auto& [name, value] : j.at("persona_judgments").items()) {
            PersonaJudgment judgment = value.get<PersonaJudgment>();
            r.persona_judgments[persona_from_name(name)] = std::move(judgment);
        }
    }
    if (j.contains("external_label")) r.external_label = j.at("external_label").get<double>();
}

}  // namespace judgeagg
