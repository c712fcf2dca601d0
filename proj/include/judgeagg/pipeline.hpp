#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgeagg/aggregators.hpp"
#include "judgeagg/analysis.hpp"
#include "judgeagg/core.hpp"
#include "judgeagg/dataset_io.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/gateway.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/report.hpp"
#include "judgeagg/robustness.hpp"
#include "judgeagg/synthetic.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DatasetConfig {
    std::string source = "synthetic";  // "synthetic" | "jsonl"
    std::filesystem::path path;
    std::optional<std::size_t> limit;
    int answer_index = 0;
    ExternalScale external_scale;
    SyntheticSpec synthetic;
};

struct SweepSpec {
    bool contamination_enabled = false;
    std::vector<double> fractions = {0.0, 0.25, 0.5};
    std::vector<ContaminationPattern::Kind> patterns = {
        ContaminationPattern::Kind::SystematicBias, ContaminationPattern::Kind::RandomNoise,
        ContaminationPattern::Kind::ScaleCompression};
    std::vector<SweepModel> contamination_models = {SweepModel::Gam, SweepModel::Linear};

    bool bias_enabled = false;
    std::vector<double> strengths = {0.0, 0.5, 1.0};
    std::vector<BiasTransform::Kind> transforms = {kAllBiasKinds.begin(), kAllBiasKinds.end()};
    std::vector<SweepModel> bias_models = {SweepModel::Gam, SweepModel::Linear,
                                           SweepModel::TenJudgeMean};
    bool transform_train = true;  // false = drift hits scoring time only
};

struct ImportanceSpec {
    bool enabled = false;
    int stability_runs = 20;
    int permutation_repeats = 5;
};

inline const std::vector<std::string> kDefaultModels = {
    "gam",           "mlp",
    "linear",        "linear_best_judge",
    "ten_judge_mean", "best_single_judge",
    "ultrafeedback_four"};

struct PipelineConfig {
    DatasetConfig dataset;
    GatewayConfig gateway;
    std::vector<PersonaId> personas = {kAllPersonas.begin(), kAllPersonas.end()};
    GroundTruthStrategy ground_truth = GroundTruthStrategy::mixed(0);
    SplitSpec split;  // seed 0 = derive from the global seed
    std::vector<std::string> models = kDefaultModels;
    GamConfig gam;
    MlpConfig mlp;  // seed 0 = derive from the global seed
    bool search_enabled = false;
    SearchGrid grid;
    SweepSpec sweeps;
    ImportanceSpec importance;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 42;
};

// --- JSON bindings (absent keys keep defaults) -----------------------------

inline void to_json(nlohmann::json& j, const GatewayConfig& c) {
    j = nlohmann::json{{"endpoint_url", c.endpoint_url},
                       {"model_name", c.model_name},
                       {"api_key_env", c.api_key_env},
                       {"max_parallel", c.max_parallel},
                       {"max_retries", c.max_retries},
                       {"temperature", c.temperature},
                       {"cache_dir", c.cache_dir.string()},
                       {"offline", c.offline},
                       {"retry_temperature", c.retry_temperature},
                       {"backoff_ms", c.backoff_ms}};
}

inline void from_json(const nlohmann::json& j, GatewayConfig& c) {
    if (j.contains("endpoint_url")) j.at("endpoint_url").get_to(c.endpoint_url);
    if (j.contains("model_name")) j.at("model_name").get_to(c.model_name);
    if (j.contains("api_key_env")) j.at("api_key_env").get_to(c.api_key_env);
    if (j.contains("max_parallel")) j.at("max_parallel").get_to(c.max_parallel);
    if (j.contains("max_retries")) j.at("max_retries").get_to(c.max_retries);
    if (j.contains("temperature")) j.at("temperature").get_to(c.temperature);
    if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("offline")) j.at("offline").get_to(c.offline);
    if (j.contains("retry_temperature")) j.at("retry_temperature").get_to(c.retry_temperature);
    if (j.contains("backoff_ms")) j.at("backoff_ms").get_to(c.backoff_ms);
    if (c.max_parallel < 1) throw ConfigError("gateway max_parallel must be >= 1");
}

inline void to_json(nlohmann::json& j, const ExternalScale& s) {
    j = nlohmann::json{{"lo", s.lo}, {"hi", s.hi}};
}

inline void from_json(const nlohmann::json& j, ExternalScale& s) {
    if (j.contains("lo")) j.at("lo").get_to(s.lo);
    if (j.contains("hi")) j.at("hi").get_to(s.hi);
    if (!(s.hi > s.lo)) throw ConfigError("external scale must satisfy hi > lo");
}

inline void to_json(nlohmann::json& j, const DatasetConfig& c) {
    j = nlohmann::json{{"source", c.source},
                       {"path", c.path.string()},
                       {"answer_index", c.answer_index},
                       {"external_scale", c.external_scale},
                       {"synthetic", c.synthetic}};
    if (c.limit) j["limit"] = *c.limit;
}

inline void from_json(const nlohmann::json& j, DatasetConfig& c) {
    if (j.contains("source")) j.at("source").get_to(c.source);
    if (c.source != "synthetic" && c.source != "jsonl") {
        throw ConfigError("dataset source must be 'synthetic' or 'jsonl'");
    }
    if (j.contains("path")) c.path = j.at("path").get<std::string>();
    if (j.contains("limit")) c.limit = j.at("limit").get<std::size_t>();
    if (j.contains("answer_index")) j.at("answer_index").get_to(c.answer_index);
    if (j.contains("external_scale")) j.at("external_scale").get_to(c.external_scale);
    if (j.contains("synthetic")) j.at("synthetic").get_to(c.synthetic);
}

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
    j = nlohmann::json{{"train_fraction", s.train_fraction}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SplitSpec& s) {
    if (j.contains("train_fraction")) j.at("train_fraction").get_to(s.train_fraction);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
}

inline void to_json(nlohmann::json& j, const SearchGrid& g) {
    j = nlohmann::json{{"gam_n_splines", g.gam_n_splines},
                       {"gam_lambda", g.gam_lambda},
                       {"mlp_hidden_dims", g.mlp_hidden_dims},
                       {"mlp_learning_rates", g.mlp_learning_rates}};
}

inline void from_json(const nlohmann::json& j, SearchGrid& g) {
    if (j.contains("gam_n_splines")) j.at("gam_n_splines").get_to(g.gam_n_splines);
    if (j.contains("gam_lambda")) j.at("gam_lambda").get_to(g.gam_lambda);
    if (j.contains("mlp_hidden_dims")) j.at("mlp_hidden_dims").get_to(g.mlp_hidden_dims);
    if (j.contains("mlp_learning_rates")) {
        j.at("mlp_learning_rates").get_to(g.mlp_learning_rates);
    }
}

inline void to_json(nlohmann::json& j, const SweepSpec& s) {
    nlohmann::json patterns = nlohmann::json::array();
    for (auto k : s.patterns) patterns.push_back(contamination_kind_name(k));
    nlohmann::json transforms = nlohmann::json::array();
    for (auto k : s.transforms) transforms.push_back(bias_kind_name(k));
    nlohmann::json cmodels = nlohmann::json::array();
    for (auto m : s.contamination_models) cmodels.push_back(sweep_model_name(m));
    nlohmann::json bmodels = nlohmann::json::array();
    for (auto m : s.bias_models) bmodels.push_back(sweep_model_name(m));
    j = nlohmann::json{{"contamination_enabled", s.contamination_enabled},
                       {"fractions", s.fractions},
                       {"patterns", std::move(patterns)},
                       {"contamination_models", std::move(cmodels)},
                       {"bias_enabled", s.bias_enabled},
                       {"strengths", s.strengths},
                       {"transforms", std::move(transforms)},
                       {"bias_models", std::move(bmodels)},
                       {"transform_train", s.transform_train}};
}

inline void from_json(const nlohmann::json& j, SweepSpec& s) {
    if (j.contains("contamination_enabled")) {
        j.at("contamination_enabled").get_to(s.contamination_enabled);
    }
    if (j.contains("fractions")) j.at("fractions").get_to(s.fractions);
    if (j.contains("patterns")) {
        s.patterns.clear();
        for (const auto& name : j.at("patterns")) {
            s.patterns.push_back(contamination_kind_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("contamination_models")) {
        s.contamination_models.clear();
        for (const auto& name : j.at("contamination_models")) {
            s.contamination_models.push_back(sweep_model_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("bias_enabled")) j.at("bias_enabled").get_to(s.bias_enabled);
    if (j.contains("strengths")) j.at("strengths").get_to(s.strengths);
    if (j.contains("transforms")) {
        s.transforms.clear();
        for (const auto& name : j.at("transforms")) {
            s.transforms.push_back(bias_kind_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("bias_models")) {
        s.bias_models.clear();
        for (const auto& name : j.at("bias_models")) {
            s.bias_models.push_back(sweep_model_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("transform_train")) j.at("transform_train").get_to(s.transform_train);
}

inline void to_json(nlohmann::json& j, const ImportanceSpec& s) {
    j = nlohmann::json{{"enabled", s.enabled},
                       {"stability_runs", s.stability_runs},
                       {"permutation_repeats", s.permutation_repeats}};
}

inline void from_json(const nlohmann::json& j, ImportanceSpec& s) {
    if (j.contains("enabled")) j.at("enabled").get_to(s.enabled);
    if (j.contains("stability_runs")) j.at("stability_runs").get_to(s.stability_runs);
    if (j.contains("permutation_repeats")) {
        j.at("permutation_repeats").get_to(s.permutation_repeats);
    }
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
    nlohmann::json personas = nlohmann::json::array();
    for (PersonaId p : c.personas) personas.push_back(persona_name(p));
    j = nlohmann::json{{"dataset", c.dataset},
                       {"gateway", c.gateway},
                       {"personas", std::move(personas)},
                       {"ground_truth", c.ground_truth},
                       {"split", c.split},
                       {"models", c.models},
                       {"gam", c.gam},
                       {"mlp", c.mlp},
                       {"search_enabled", c.search_enabled},
                       {"grid", c.grid},
                       {"sweeps", c.sweeps},
                       {"importance", c.importance},
                       {"output_dir", c.output_dir.string()},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
    if (j.contains("dataset")) j.at("dataset").get_to(c.dataset);
    if (j.contains("gateway")) j.at("gateway").get_to(c.gateway);
    if (j.contains("personas")) {
        c.personas.clear();
        for (const auto& name : j.at("personas")) {
            c.personas.push_back(persona_from_name(name.get<std::string>()));
        }
        if (c.personas.empty()) throw ConfigError("persona subset must be non-empty");
    }
    if (j.contains("ground_truth")) j.at("ground_truth").get_to(c.ground_truth);
    if (j.contains("split")) j.at("split").get_to(c.split);
    if (j.contains("models")) j.at("models").get_to(c.models);
    if (j.contains("gam")) j.at("gam").get_to(c.gam);
    if (j.contains("mlp")) j.at("mlp").get_to(c.mlp);
    if (j.contains("search_enabled")) j.at("search_enabled").get_to(c.search_enabled);
    if (j.contains("grid")) j.at("grid").get_to(c.grid);
    if (j.contains("sweeps")) j.at("sweeps").get_to(c.sweeps);
    if (j.contains("importance")) j.at("importance").get_to(c.importance);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
    try {
        return j.get<PipelineConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

enum class Stage {
    Ingest,
    JudgeScores,
    PersonaScores,
    Label,
    Split,
    Search,
    Train,
    Evaluate,
    SweepContamination,
    SweepBias,
    Importance,
    Report,
};

inline std::string_view stage_name(Stage stage) {
    switch (stage) {
        case Stage::Ingest: return "ingest";
        case Stage::JudgeScores: return "judge-scores";
        case Stage::PersonaScores: return "persona-scores";
        case Stage::Label: return "label";
        case Stage::Split: return "split";
        case Stage::Search: return "search";
        case Stage::Train: return "train";
        case Stage::Evaluate: return "evaluate";
        case Stage::SweepContamination: return "sweep-contamination";
        case Stage::SweepBias: return "sweep-bias";
        case Stage::Importance: return "importance";
        case Stage::Report: return "report";
    }
    return "unknown";
}

/// Which stages a run executes; subcommands force optional stages on.
struct StageSelection {
    Stage until = Stage::Report;
    bool force_search = false;
    bool force_contamination = false;
    bool force_bias = false;
    bool force_importance = false;
};

namespace detail {

template <typename F>
auto with_stage_tag(Stage stage, F&& f) {
    auto tag = [&](const std::string& what) {
        return "[" + std::string(stage_name(stage)) + "] " + what;
    };
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(tag(e.what()));
    } catch (const IngestError& e) {
        throw IngestError(tag(e.what()));
    } catch (const GatewayError& e) {
        throw GatewayError(e.kind(), tag(e.what()));
    } catch (const MissingJudgments& e) {
        throw MissingJudgments(tag(e.what()));
    } catch (const InsufficientData& e) {
        throw InsufficientData(tag(e.what()));
    } catch (const DegenerateInput& e) {
        throw DegenerateInput(tag(e.what()));
    } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss(tag(e.what()));
    } catch (const IoError& e) {
        throw IoError(tag(e.what()));
    }
}

}  // namespace detail

/// One pipeline instance per output directory; the lock file is created
/// exclusively and removed when the run finishes.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".pipeline-lock") {
        std::filesystem::create_directories(dir);
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw IoError("output directory is locked by another pipeline run: " +
                          path_.string());
        }
        ::close(fd);
    }

    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

    ~DirectoryLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

private:
    std::filesystem::path path_;
};

/// Stage outputs keyed by a cumulative config hash: a rerun with an unchanged
/// upstream config reuses the file, any upstream change recomputes from that
/// stage on.
class CheckpointStore {
public:
    explicit CheckpointStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    nlohmann::json run(int order, Stage stage, const std::string& hash,
                       const std::function<nlohmann::json()>& compute, bool* reused = nullptr) {
        char prefix[8];
        std::snprintf(prefix, sizeof prefix, "%02d", order);
        auto path =
            dir_ / (std::string(prefix) + "_" + std::string(stage_name(stage)) + ".json");
        if (std::ifstream in(path); in) {
            nlohmann::json existing = nlohmann::json::parse(in, nullptr, false);
            if (!existing.is_discarded() && existing.value("hash", "") == hash) {
                if (reused != nullptr) *reused = true;
                return existing.at("data");
            }
        }
        if (reused != nullptr) *reused = false;
        nlohmann::json data = detail::with_stage_tag(stage, compute);
        nlohmann::json wrapper{{"stage", stage_name(stage)}, {"hash", hash}, {"data", data}};
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw IoError("cannot write checkpoint " + tmp.string());
            out << wrapper.dump() << '\n';
        }
        std::filesystem::rename(tmp, path);
        return data;
    }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// The pipeline
// ---------------------------------------------------------------------------

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config) : config_(std::move(config)) {}

    const PipelineConfig& config() const { return config_; }

    std::uint64_t effective_split_seed() const {
        return config_.split.seed != 0 ? config_.split.seed : mix_seed(config_.seed, "split");
    }

    std::uint64_t effective_label_seed() const {
        return config_.ground_truth.seed != 0 ? config_.ground_truth.seed
                                              : mix_seed(config_.seed, "label");
    }

    std::uint64_t effective_mlp_seed() const {
        return config_.mlp.seed != 0 ? config_.mlp.seed : mix_seed(config_.seed, "mlp");
    }

    ExperimentReport run(const StageSelection& selection = {}) {
        DirectoryLock lock(config_.output_dir);
        CheckpointStore store(config_.output_dir / "checkpoints");
        ExperimentReport report;

        const nlohmann::json config_json = config_;
        std::string hash = sha256_hex("judgeagg-pipeline-v1");
        auto advance = [&](Stage stage, const nlohmann::json& slice) {
            hash = sha256_hex(hash + "\x1f" + std::string(stage_name(stage)) + "\x1f" +
                              slice.dump());
            return hash;
        };

        // --- ingest -----------------------------------------------------
        nlohmann::json ingest_slice{{"dataset", config_.dataset}};
        auto ingest_data = store.run(0, Stage::Ingest, advance(Stage::Ingest, ingest_slice),
                                     [&] { return stage_ingest(); });
        if (selection.until == Stage::Ingest) return report;

        // --- judge scores -------------------------------------------------
        nlohmann::json judges_slice{{"model_name", config_.gateway.model_name},
                                    {"temperature", config_.gateway.temperature}};
        auto judge_data =
            store.run(1, Stage::JudgeScores, advance(Stage::JudgeScores, judges_slice),
                      [&] { return stage_judge_scores(ingest_data); });
        if (selection.until == Stage::JudgeScores) return report;

        // --- persona scores ------------------------------------------------
        nlohmann::json personas_json = nlohmann::json::array();
        for (PersonaId p : config_.personas) personas_json.push_back(persona_name(p));
        nlohmann::json persona_slice{{"personas", personas_json}};
        auto persona_data =
            store.run(2, Stage::PersonaScores, advance(Stage::PersonaScores, persona_slice),
                      [&] { return stage_persona_scores(judge_data); });
        if (selection.until == Stage::PersonaScores) return report;

        // --- label ----------------------------------------------------------
        nlohmann::json label_slice{{"ground_truth", config_.ground_truth},
                                   {"external_scale", config_.dataset.external_scale},
                                   {"label_seed", effective_label_seed()}};
        auto label_data = store.run(3, Stage::Label, advance(Stage::Label, label_slice),
                                    [&] { return stage_label(persona_data); });
        if (selection.until == Stage::Label) return report;

        // --- split ------------------------------------------------------------
        nlohmann::json split_slice{{"train_fraction", config_.split.train_fraction},
                                   {"seed", effective_split_seed()}};
        auto split_data = store.run(4, Stage::Split, advance(Stage::Split, split_slice),
                                    [&] { return stage_split(label_data); });
        if (selection.until == Stage::Split) return report;

        auto train = split_data.at("train").get<std::vector<LabeledExample>>();
        auto test = split_data.at("test").get<std::vector<LabeledExample>>();

        // --- hyperparameter search (optional) -------------------------------
        GamConfig gam_config = config_.gam;
        MlpConfig mlp_config = config_.mlp;
        mlp_config.seed = effective_mlp_seed();
        const bool run_search = config_.search_enabled || selection.force_search;
        nlohmann::json search_slice{{"enabled", run_search}, {"grid", config_.grid}};
        if (run_search) {
            auto search_data = store.run(5, Stage::Search, advance(Stage::Search, search_slice),
                                         [&] { return stage_search(train, mlp_config); });
            gam_config = search_data.at("gam_best").get<GamConfig>();
            report.gam_search = load_cells(search_data.at("gam_table"));
            if (search_data.contains("mlp_best")) {
                const auto seed = mlp_config.seed;
                mlp_config = search_data.at("mlp_best").get<MlpConfig>();
                mlp_config.seed = seed;
                report.mlp_search = load_cells(search_data.at("mlp_table"));
            }
        } else {
            advance(Stage::Search, search_slice);
        }
        if (selection.until == Stage::Search) return report;

        // --- train -------------------------------------------------------------
        nlohmann::json train_slice{{"models", config_.models},
                                   {"gam", gam_config},
                                   {"mlp", mlp_config}};
        auto train_data = store.run(6, Stage::Train, advance(Stage::Train, train_slice),
                                    [&] { return stage_train(train, gam_config, mlp_config); });
        if (selection.until == Stage::Train) return report;

        std::map<std::string, AggregatorModel> models;
        for (const auto& [name, doc] : train_data.at("models").items()) {
            models.emplace(name, deserialize_model(doc));
        }

        // --- evaluate ------------------------------------------------------------
        auto eval_data =
            store.run(7, Stage::Evaluate, advance(Stage::Evaluate, nlohmann::json::object()),
                      [&] { return stage_evaluate(models, test); });
        for (const auto& name : config_.models) {
            report.model_r2.push_back(
                ModelScore{name, eval_data.at("r2").at(name).get<double>()});
        }
        if (selection.until == Stage::Evaluate) return report;

        // --- sweeps ---------------------------------------------------------------
        const bool run_contamination =
            config_.sweeps.contamination_enabled || selection.force_contamination;
        nlohmann::json contamination_slice{{"enabled", run_contamination},
                                           {"sweeps", config_.sweeps},
                                           {"seed", config_.seed}};
        if (run_contamination) {
            auto data = store.run(
                8, Stage::SweepContamination,
                advance(Stage::SweepContamination, contamination_slice), [&] {
                    return stage_sweep_contamination(persona_data, split_data, gam_config,
                                                     mlp_config);
                });
            report.sweeps.emplace_back("sweep_contamination", data.get<SweepResult>());
        } else {
            advance(Stage::SweepContamination, contamination_slice);
        }
        if (selection.until == Stage::SweepContamination) return report;

        const bool run_bias = config_.sweeps.bias_enabled || selection.force_bias;
        nlohmann::json bias_slice{{"enabled", run_bias},
                                  {"sweeps", config_.sweeps},
                                  {"seed", config_.seed}};
        if (run_bias) {
            auto data =
                store.run(9, Stage::SweepBias, advance(Stage::SweepBias, bias_slice), [&] {
                    return stage_sweep_bias(train, test, gam_config, mlp_config);
                });
            report.sweeps.emplace_back("sweep_bias", data.get<SweepResult>());
        } else {
            advance(Stage::SweepBias, bias_slice);
        }
        if (selection.until == Stage::SweepBias) return report;

        // --- importance --------------------------------------------------------------
        const bool run_importance = config_.importance.enabled || selection.force_importance;
        nlohmann::json importance_slice{{"enabled", run_importance},
                                        {"importance", config_.importance},
                                        {"seed", config_.seed}};
        if (run_importance) {
            auto data = store.run(10, Stage::Importance,
                                  advance(Stage::Importance, importance_slice), [&] {
                                      return stage_importance(train, models, test, gam_config);
                                  });
            ImportanceStabilityReport stability;
            stability.runs =
                data.at("runs").get<std::vector<std::array<double, kNumJudges>>>();
            for (std::size_t j = 0; j < kNumJudges; ++j) {
                auto& stats = stability.per_judge[j];
                const auto& sj = data.at("per_judge").at(j);
                stats.mean = sj.at("mean").get<double>();
                stats.stddev = sj.at("stddev").get<double>();
                stats.cv_defined = sj.at("cv_defined").get<bool>();
                stats.cv = sj.value("cv", 0.0);
            }
            report.importance = std::move(stability);
            for (const auto& [name, drops] : data.at("permutation").items()) {
                report.permutation.emplace_back(
                    name, drops.get<std::array<double, kNumJudges>>());
            }
        } else {
            advance(Stage::Importance, importance_slice);
        }
        if (selection.until == Stage::Importance) return report;

        // --- report ----------------------------------------------------------------
        report.scatter = scatter_points(label_data);
        report.scatter_condition = std::string(strategy_kind_name(config_.ground_truth.kind));
        report.provenance = nlohmann::json{
            {"config_hash", sha256_hex(config_json.dump())},
            {"seed", config_.seed},
            {"split_seed", effective_split_seed()},
            {"label_seed", effective_label_seed()},
            {"mlp_seed", effective_mlp_seed()},
            {"cache", nlohmann::json{{"hits", cache_hits_}, {"misses", cache_misses_}}},
            {"records", ingest_data.at("records").size()},
            {"dropped",
             judge_data.value("dropped", 0) + persona_data.value("dropped", 0)}};
        detail::with_stage_tag(Stage::Report, [&] {
            emit_report(report, config_.output_dir);
            return nlohmann::json();
        });
        return report;
    }

private:
    static std::vector<SearchCell> load_cells(const nlohmann::json& rows) {
        std::vector<SearchCell> cells;
        for (const auto& row : rows) {
            SearchCell cell;
            cell.a = row.at("a").get<double>();
            cell.b = row.at("b").get<double>();
            cell.val_r2 = row.at("val_r2").get<double>();
            cell.failed = row.at("failed").get<bool>();
            cell.error = row.value("error", "");
            cells.push_back(std::move(cell));
        }
        return cells;
    }

    static nlohmann::json dump_cells(const std::vector<SearchCell>& cells) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& cell : cells) {
            rows.push_back(nlohmann::json{{"a", cell.a},
                                          {"b", cell.b},
                                          {"val_r2", cell.val_r2},
                                          {"failed", cell.failed},
                                          {"error", cell.error}});
        }
        return rows;
    }

    nlohmann::json stage_ingest() {
        nlohmann::json data;
        if (config_.dataset.source == "synthetic") {
            SyntheticSpec spec = config_.dataset.synthetic;
            if (config_.dataset.limit) spec.n = std::min(spec.n, *config_.dataset.limit);
            data["records"] = generate_synthetic_records(spec);
            data["skipped"] = 0;
        } else {
            IngestOptions options{config_.dataset.limit, config_.dataset.answer_index};
            auto result = ingest_ultrafeedback(config_.dataset.path, options);
            data["records"] = result.records;
            data["skipped"] = result.skipped;
        }
        return data;
    }

    /// Fills judge scores through the gateway for any record that lacks them.
    /// Records whose scores cannot be obtained after retries are dropped and
    /// counted, never imputed; auth and offline failures abort the stage.
    nlohmann::json stage_judge_scores(const nlohmann::json& ingest_data) {
        auto records = ingest_data.at("records").get<std::vector<DatasetRecord>>();
        return score_records(records, /*judges=*/true);
    }

    nlohmann::json stage_persona_scores(const nlohmann::json& judge_data) {
        auto records = judge_data.at("records").get<std::vector<DatasetRecord>>();
        return score_records(records, /*judges=*/false);
    }

    nlohmann::json score_records(std::vector<DatasetRecord>& records, bool judges) {
        std::vector<bool> dropped(records.size(), false);
        std::mutex failure_mutex;
        std::optional<GatewayError> fatal;
        DiskCache cache(config_.gateway.cache_dir);

        bool anything_missing = false;
        for (const auto& record : records) {
            if (judges ? !record.judge_scores
                       : record.persona_judgments.size() < config_.personas.size()) {
                anything_missing = true;
                break;
            }
        }
        if (anything_missing) {
            parallel_for(records.size(), config_.gateway.max_parallel, [&](std::size_t i) {
                {
                    std::scoped_lock lock(failure_mutex);
                    if (fatal) return;
                }
                try {
                    if (judges) {
                        if (!records[i].judge_scores) {
                            JudgeScoreVector scores;
                            for (JudgeId judge : kAllJudges) {
                                scores[judge] = fetch_judge_score(JudgeRubric::builtin(judge),
                                                                  records[i], config_.gateway,
                                                                  cache);
                            }
                            records[i].judge_scores = scores;
                        }
                    } else {
                        for (PersonaId persona : config_.personas) {
                            if (!records[i].persona_judgments.contains(persona)) {
                                records[i].persona_judgments[persona] = fetch_persona_judgment(
                                    persona, records[i], config_.gateway, cache);
                            }
                        }
                    }
                } catch (const GatewayError& e) {
                    if (e.kind() == GatewayError::Kind::ExhaustedRetries) {
                        dropped[i] = true;
                        std::cerr << "dropping record " << records[i].record_id << ": "
                                  << e.what() << '\n';
                    } else {
                        std::scoped_lock lock(failure_mutex);
                        if (!fatal) fatal = e;
                    }
                }
            });
        }
        if (fatal) throw *fatal;
        cache_hits_ += cache.hits();
        cache_misses_ += cache.misses();

        std::vector<DatasetRecord> kept;
        kept.reserve(records.size());
        int dropped_count = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (dropped[i]) {
                ++dropped_count;
            } else {
                kept.push_back(std::move(records[i]));
            }
        }
        return nlohmann::json{{"records", kept}, {"dropped", dropped_count}};
    }

    nlohmann::json stage_label(const nlohmann::json& persona_data) {
        auto records = persona_data.at("records").get<std::vector<DatasetRecord>>();
        GroundTruthStrategy strategy = config_.ground_truth;
        if (strategy.kind == GroundTruthStrategy::Kind::MixedPersonas) {
            strategy.seed = effective_label_seed();
        }
        auto examples = build_labeled_examples(records, strategy, config_.personas,
                                               config_.dataset.external_scale);
        return nlohmann::json{{"examples", examples}};
    }

    nlohmann::json stage_split(const nlohmann::json& label_data) {
        auto examples = label_data.at("examples").get<std::vector<LabeledExample>>();
        Split split =
            split_dataset(examples, SplitSpec{config_.split.train_fraction,
                                              effective_split_seed()});
        return nlohmann::json{{"train", split.train}, {"test", split.test}};
    }

    nlohmann::json stage_search(std::span<const LabeledExample> train,
                                const MlpConfig& mlp_base) {
        nlohmann::json data;
        auto gam_result = search_gam(train, config_.grid, mix_seed(config_.seed, "search"));
        data["gam_best"] = gam_result.best;
        data["gam_table"] = dump_cells(gam_result.table);
        bool want_mlp = std::find(config_.models.begin(), config_.models.end(), "mlp") !=
                        config_.models.end();
        if (want_mlp) {
            auto mlp_result =
                search_mlp(train, config_.grid, mix_seed(config_.seed, "search"), mlp_base);
            data["mlp_best"] = mlp_result.best;
            data["mlp_table"] = dump_cells(mlp_result.table);
        }
        return data;
    }

    nlohmann::json stage_train(std::span<const LabeledExample> train,
                               const GamConfig& gam_config, const MlpConfig& mlp_config) {
        nlohmann::json models = nlohmann::json::object();
        for (const auto& name : config_.models) {
            models[name] = serialize_model(fit_named_model(name, train, gam_config, mlp_config));
        }
        return nlohmann::json{{"models", models}};
    }

    AggregatorModel fit_named_model(const std::string& name,
                                    std::span<const LabeledExample> train,
                                    const GamConfig& gam_config, const MlpConfig& mlp_config) {
        if (name == "gam") return fit_gam(train, gam_config);
        if (name == "mlp") return fit_mlp(train, mlp_config);
        if (name == "linear") return fit_linear(train);
        if (name == "linear_best_judge") {
            auto best = select_best_judge(train);
            return fit_linear(train,
                              std::vector<std::size_t>{static_cast<std::size_t>(best)});
        }
        if (name == "ten_judge_mean") return HeuristicModel{HeuristicKind::ten_judge_mean()};
        if (name == "best_single_judge") {
            return HeuristicModel{HeuristicKind::best_single(select_best_judge(train))};
        }
        if (name == "ultrafeedback_four") {
            return HeuristicModel{HeuristicKind::ultrafeedback_four()};
        }
        throw ConfigError("unknown model name: " + name);
    }

    nlohmann::json stage_evaluate(const std::map<std::string, AggregatorModel>& models,
                                  std::span<const LabeledExample> test) {
        nlohmann::json r2 = nlohmann::json::object();
        for (const auto& [name, model] : models) r2[name] = evaluate_r2(model, test);
        return nlohmann::json{{"r2", r2}};
    }

    nlohmann::json stage_sweep_contamination(const nlohmann::json& persona_data,
                                             const nlohmann::json& split_data,
                                             const GamConfig& gam_config,
                                             const MlpConfig& mlp_config) {
        auto records = persona_data.at("records").get<std::vector<DatasetRecord>>();
        std::map<std::string, const DatasetRecord*> by_id;
        for (const auto& record : records) by_id[record.record_id] = &record;

        // The sweep contract wants mixed-persona labels; rebuild both splits
        // with that strategy so the fraction-0 arm is the clean baseline.
        const std::uint64_t label_seed = effective_label_seed();
        auto relabel = [&](const nlohmann::json& side) {
            std::vector<DatasetRecord> subset;
            for (const auto& ex : side) {
                auto it = by_id.find(ex.at("record_id").get<std::string>());
                if (it == by_id.end()) {
                    throw DegenerateInput("split references unknown record");
                }
                subset.push_back(*it->second);
            }
            return subset;
        };
        auto train_records = relabel(split_data.at("train"));
        auto test_records = relabel(split_data.at("test"));
        auto test_examples = build_labeled_examples(
            test_records, GroundTruthStrategy::mixed(label_seed), config_.personas);

        SweepFitConfig fit{gam_config, mlp_config};
        SweepResult result = run_contamination_sweep(
            train_records, test_examples, config_.sweeps.fractions, config_.sweeps.patterns,
            config_.sweeps.contamination_models, config_.personas, label_seed,
            mix_seed(config_.seed, "sweep-contamination"), fit);
        return result;
    }

    nlohmann::json stage_sweep_bias(std::span<const LabeledExample> train,
                                    std::span<const LabeledExample> test,
                                    const GamConfig& gam_config, const MlpConfig& mlp_config) {
        SweepFitConfig fit{gam_config, mlp_config};
        SweepResult result = run_bias_sweep(
            train, test, config_.sweeps.strengths, config_.sweeps.transforms,
            config_.sweeps.bias_models, mix_seed(config_.seed, "sweep-bias"), fit,
            config_.sweeps.transform_train);
        return result;
    }

    nlohmann::json stage_importance(std::span<const LabeledExample> train,
                                    const std::map<std::string, AggregatorModel>& models,
                                    std::span<const LabeledExample> test,
                                    const GamConfig& gam_config) {
        auto stability =
            importance_stability(train, gam_config, config_.importance.stability_runs,
                                 mix_seed(config_.seed, "importance-jitter"));
        nlohmann::json per_judge = nlohmann::json::array();
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            const auto& stats = stability.per_judge[j];
            nlohmann::json sj{{"mean", stats.mean},
                              {"stddev", stats.stddev},
                              {"cv_defined", stats.cv_defined}};
            if (stats.cv_defined) sj["cv"] = stats.cv;
            per_judge.push_back(std::move(sj));
        }
        nlohmann::json permutation = nlohmann::json::object();
        for (const auto& [name, model] : models) {
            if (name != "gam" && name != "mlp" && name != "linear" &&
                name != "linear_best_judge") {
                continue;  // permutation importance targets learned models
            }
            permutation[name] =
                permutation_importance(model, test, mix_seed(config_.seed, "permutation"),
                                       config_.importance.permutation_repeats);
        }
        return nlohmann::json{
            {"runs", stability.runs}, {"per_judge", per_judge}, {"permutation", permutation}};
    }

    std::vector<ScatterPoint> scatter_points(const nlohmann::json& label_data) {
        std::vector<ScatterPoint> points;
        for (const auto& ex : label_data.at("examples")) {
            LabeledExample example = ex.get<LabeledExample>();
            double mean = 0.0;
            for (std::size_t j = 0; j < kNumJudges; ++j) mean += example.features[j];
            mean /= static_cast<double>(kNumJudges);
            points.push_back(ScatterPoint{example.record_id, mean, example.label});
        }
        return points;
    }

    PipelineConfig config_;
    std::uint64_t cache_hits_ = 0;
    std::uint64_t cache_misses_ = 0;
};

inline ExperimentReport run_pipeline(const PipelineConfig& config,
                                     const StageSelection& selection = {}) {
    Pipeline pipeline(config);
    return pipeline.run(selection);
}

}  // namespace judgeagg
