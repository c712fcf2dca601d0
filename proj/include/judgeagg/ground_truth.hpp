#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/rng.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// How the training target y is derived from a record's persona judgments
/// (or its external label).
struct GroundTruthStrategy {
    enum class Kind { MixedPersonas, PersonaMean, SinglePersona, External };

    Kind kind = Kind::MixedPersonas;
    PersonaId persona = PersonaId::Professor;  // SinglePersona only
    std::uint64_t seed = 0;                    // MixedPersonas only

    static GroundTruthStrategy mixed(std::uint64_t seed) {
        return {Kind::MixedPersonas, PersonaId::Professor, seed};
    }
    static GroundTruthStrategy mean() { return {Kind::PersonaMean, PersonaId::Professor, 0}; }
    static GroundTruthStrategy single(PersonaId persona) {
        return {Kind::SinglePersona, persona, 0};
    }
    static GroundTruthStrategy external() { return {Kind::External, PersonaId::Professor, 0}; }
};

inline std::string_view strategy_kind_name(GroundTruthStrategy::Kind kind) {
    switch (kind) {
        case GroundTruthStrategy::Kind::MixedPersonas: return "mixed";
        case GroundTruthStrategy::Kind::PersonaMean: return "mean";
        case GroundTruthStrategy::Kind::SinglePersona: return "single";
        case GroundTruthStrategy::Kind::External: return "external";
    }
    return "mixed";
}

inline GroundTruthStrategy::Kind strategy_kind_from_name(std::string_view name) {
    if (name == "mixed") return GroundTruthStrategy::Kind::MixedPersonas;
    if (name == "mean") return GroundTruthStrategy::Kind::PersonaMean;
    if (name == "single") return GroundTruthStrategy::Kind::SinglePersona;
    if (name == "external") return GroundTruthStrategy::Kind::External;
    throw ConfigError("unknown ground-truth strategy: " + std::string(name));
}

inline void to_json(nlohmann::json& j, const GroundTruthStrategy& s) {
    j = nlohmann::json{{"kind", strategy_kind_name(s.kind)}};
    if (s.kind == GroundTruthStrategy::Kind::SinglePersona) {
        j["persona"] = persona_name(s.persona);
    }
    if (s.kind == GroundTruthStrategy::Kind::MixedPersonas) j["seed"] = s.seed;
}

inline void from_json(const nlohmann::json& j, GroundTruthStrategy& s) {
    s.kind = strategy_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("persona")) s.persona = persona_from_name(j.at("persona").get<std::string>());
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
}

/// Declared scale of an external label source; labels are mapped affinely
/// onto [0, 10].
struct ExternalScale {
    double lo = 0.0;
    double hi = 10.0;
};

// ---------------------------------------------------------------------------
// Training pairs
// ---------------------------------------------------------------------------

struct LabeledExample {
    JudgeScoreVector features;
    double label = 0.0;
    GroundTruthStrategy source;
    std::string record_id;
};

inline void to_json(nlohmann::json& j, const LabeledExample& e) {
    j = nlohmann::json{{"features", e.features},
                       {"label", e.label},
                       {"source", e.source},
                       {"record_id", e.record_id}};
}

inline void from_json(const nlohmann::json& j, LabeledExample& e) {
    j.at("features").get_to(e.features);
    j.at("label").get_to(e.label);
    j.at("source").get_to(e.source);
    j.at("record_id").get_to(e.record_id);
}

// ---------------------------------------------------------------------------
// Labeling operations
// ---------------------------------------------------------------------------

namespace detail {
inline void require_personas(const DatasetRecord& record, std::span<const PersonaId> personas) {
    for (PersonaId p : personas) {
        if (!record.persona_judgments.contains(p)) {
            throw MissingJudgments("record " + record.record_id + " lacks persona " +
                                   std::string(persona_name(p)));
        }
    }
}
}  // namespace detail

/// One persona drawn uniformly at random; the draw keys on (seed, record_id),
/// not on iteration order, so labels survive dataset reordering.
inline double label_mixed(const DatasetRecord& record, std::span<const PersonaId> personas,
                          std::uint64_t seed) {
    detail::require_personas(record, personas);
    Rng rng(mix_seed(seed, record.record_id));
    PersonaId chosen = personas[rng.uniform_below(personas.size())];
    return static_cast<double>(record.persona_judgments.at(chosen).score);
}

inline double label_mean(const DatasetRecord& record, std::span<const PersonaId> personas) {
    detail::require_personas(record, personas);
    if (personas.empty()) throw MissingJudgments("empty persona subset");
    double sum = 0.0;
    for (PersonaId p : personas) sum += record.persona_judgments.at(p).score;
    return sum / static_cast<double>(personas.size());
}

inline double label_single(const DatasetRecord& record, PersonaId persona) {
    auto it = record.persona_judgments.find(persona);
    if (it == record.persona_judgments.end()) {
        throw MissingJudgments("record " + record.record_id + " lacks persona " +
                               std::string(persona_name(persona)));
    }
    return static_cast<double>(it->second.score);
}

inline double label_external(const DatasetRecord& record, ExternalScale scale = {}) {
    if (!record.external_label) {
        throw MissingJudgments("record " + record.record_id + " has no external label");
    }
    return (*record.external_label - scale.lo) * 10.0 / (scale.hi - scale.lo);
}

inline double apply_strategy(const DatasetRecord& record, const GroundTruthStrategy& strategy,
                             std::span<const PersonaId> personas, ExternalScale scale = {}) {
    switch (strategy.kind) {
        case GroundTruthStrategy::Kind::MixedPersonas:
            return label_mixed(record, personas, strategy.seed);
        case GroundTruthStrategy::Kind::PersonaMean:
            return label_mean(record, personas);
        case GroundTruthStrategy::Kind::SinglePersona:
            return label_single(record, strategy.persona);
        case GroundTruthStrategy::Kind::External:
            return label_external(record, scale);
    }
    throw ConfigError("unreachable strategy kind");
}

/// Turns scored records into training pairs. Every record must carry a
/// complete judge-score vector and whatever judgments the strategy needs.
inline std::vector<LabeledExample> build_labeled_examples(
    std::span<const DatasetRecord> records, const GroundTruthStrategy& strategy,
    std::span<const PersonaId> personas, ExternalScale scale = {}) {
    std::vector<LabeledExample> out;
    out.reserve(records.size());
    for (const DatasetRecord& record : records) {
        if (!record.judge_scores) {
            throw MissingJudgments("record " + record.record_id + " has no judge scores");
        }
        out.push_back(LabeledExample{*record.judge_scores,
                                     apply_strategy(record, strategy, personas, scale), strategy,
                                     record.record_id});
    }
    return out;
}

}  // namespace judgeagg
