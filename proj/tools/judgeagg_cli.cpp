// Command-line front end for the multi-judge preference aggregation pipeline.
// Every subcommand runs the pipeline up to (and including) one stage; stage
// outputs are checkpointed under the configured output directory, so commands
// compose incrementally and reruns skip completed work.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "judgeagg/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool offline = false;
    std::optional<std::size_t> limit;
};

int run_command(const CommonOptions& options, const judgeagg::StageSelection& selection) {
    using namespace judgeagg;
    try {
        PipelineConfig config = load_pipeline_config(options.config_path);
        if (options.seed) config.seed = *options.seed;
        if (options.offline) config.gateway.offline = true;
        if (options.limit) config.dataset.limit = *options.limit;
        Pipeline pipeline(std::move(config));
        pipeline.run(selection);
        std::cout << "completed: " << stage_name(selection.until) << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IngestError& e) {
        std::cerr << "ingest error: " << e.what() << '\n';
        return 3;
    } catch (const GatewayError& e) {
        std::cerr << "gateway error: " << e.what() << '\n';
        return 4;
    } catch (const InsufficientData& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return 5;
    } catch (const DegenerateInput& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return 5;
    } catch (const NonFiniteLoss& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return 5;
    } catch (const MissingJudgments& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return 5;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    using judgeagg::Stage;
    using judgeagg::StageSelection;

    CLI::App app{"judgeagg: multi-judge preference aggregation pipeline"};
    app.require_subcommand(1);

    CommonOptions options;
    StageSelection selection;

    auto add_subcommand = [&](const std::string& name, const std::string& description,
                              StageSelection sel) {
        CLI::App* cmd = app.add_subcommand(name, description);
        cmd->add_option("--config", options.config_path, "pipeline config file (JSON)")
            ->required();
        cmd->add_option("--seed", options.seed, "override the global seed");
        cmd->add_flag("--offline", options.offline,
                      "never call the LLM endpoint; rely on the cache");
        cmd->add_option("--limit", options.limit, "cap the number of ingested records");
        cmd->callback([&selection, sel] { selection = sel; });
        return cmd;
    };

    add_subcommand("ingest", "parse and validate the dataset", {Stage::Ingest});
    add_subcommand("score-judges", "collect the ten rubric judge scores", {Stage::JudgeScores});
    add_subcommand("score-personas", "collect persona preference judgments",
                   {Stage::PersonaScores});
    add_subcommand("label", "derive training labels from the ground-truth strategy",
                   {Stage::Label});
    add_subcommand("search", "hyperparameter search on the training split",
                   {Stage::Search, true, false, false, false});
    add_subcommand("train", "fit every configured aggregator", {Stage::Train});
    add_subcommand("evaluate", "score fitted models on the test split", {Stage::Evaluate});
    add_subcommand("sweep-contamination", "persona contamination robustness sweep",
                   {Stage::SweepContamination, false, true, false, false});
    add_subcommand("sweep-bias", "judge bias transform robustness sweep",
                   {Stage::SweepBias, false, false, true, false});
    add_subcommand("importance", "importance stability and permutation importance",
                   {Stage::Importance, false, false, false, true});
    add_subcommand("report", "emit tables and plots for completed stages", {Stage::Report});
    add_subcommand("pipeline", "run every configured stage end to end", {Stage::Report});

    CLI11_PARSE(app, argc, argv);
    return run_command(options, selection);
}
