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
#include "judgeagg/errors.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/metrics.hpp"
#include "judgeagg/rng.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
};

/// Seeded shuffle, then cut at floor(n * train_fraction). Disjoint,
/// exhaustive, deterministic.
inline Split split_dataset(std::span<const LabeledExample> examples, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
        throw ConfigError("train_fraction must lie in (0, 1)");
    }
    if (examples.size() < 10) throw InsufficientData("split_dataset needs at least 10 examples");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(spec.seed, "dataset-split"));
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(examples.size()) * spec.train_fraction));
    Split split;
    split.train.reserve(n_train);
    split.test.reserve(examples.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? split.train : split.test).push_back(examples[order[i]]);
    }
    return split;
}

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

struct SearchGrid {
    std::vector<int> gam_n_splines = {5, 6, 7, 8, 9, 10};
    std::vector<double> gam_lambda = log_grid(0.1, 100.0, 6);
    std::vector<int> mlp_hidden_dims = {32, 64, 128};
    std::vector<double> mlp_learning_rates = {3e-4, 1e-3, 3e-3};

    static std::vector<double> log_grid(double lo, double hi, int count) {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
            out.push_back(lo * std::pow(hi / lo, t));
        }
        return out;
    }
};

struct SearchCell {
    double a = 0.0;  // n_splines or hidden_dim
    double b = 0.0;  // lambda or learning_rate
    double val_r2 = 0.0;
    bool failed = false;
    std::string error;
};

struct GamSearchResult {
    GamConfig best;
    std::vector<SearchCell> table;  // one entry per grid cell
};

struct MlpSearchResult {
    MlpConfig best;
    std::vector<SearchCell> table;
};

namespace detail {
inline Split inner_holdout(std::span<const LabeledExample> train, std::uint64_t seed) {
    return split_dataset(train, SplitSpec{0.8, mix_seed(seed, "inner-holdout")});
}
}  // namespace detail

/// Exhaustive grid evaluation on an inner 80/20 holdout carved from the
/// training data; the outer test split never enters here. Ties break toward
/// fewer splines, then larger lambda. Failed cells stay in the table and the
/// search continues.
inline GamSearchResult search_gam(std::span<const LabeledExample> train, const SearchGrid& grid,
                                  std::uint64_t inner_split_seed) {
    if (grid.gam_n_splines.empty() || grid.gam_lambda.empty()) {
        throw ConfigError("empty GAM search grid");
    }
    Split inner = detail::inner_holdout(train, inner_split_seed);
    GamSearchResult result;
    bool have_best = false;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (int n_splines : grid.gam_n_splines) {
        for (double lambda : grid.gam_lambda) {
            SearchCell cell{static_cast<double>(n_splines), lambda, 0.0, false, ""};
            try {
                GamConfig config{n_splines, lambda};
                GamModel model = fit_gam(inner.train, config);
                cell.val_r2 = evaluate_r2(AggregatorModel{model}, inner.test);
                const bool better =
                    cell.val_r2 > best_r2 ||
                    (cell.val_r2 == best_r2 && have_best &&
                     (n_splines < result.best.n_splines ||
                      (n_splines == result.best.n_splines && lambda > result.best.lambda)));
                if (better || !have_best) {
                    best_r2 = cell.val_r2;
                    result.best = config;
                    have_best = true;
                }
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            result.table.push_back(std::move(cell));
        }
    }
    if (!have_best) throw DegenerateInput("every GAM search cell failed");
    return result;
}

inline MlpSearchResult search_mlp(std::span<const LabeledExample> train, const SearchGrid& grid,
                                  std::uint64_t inner_split_seed, const MlpConfig& base) {
    if (grid.mlp_hidden_dims.empty() || grid.mlp_learning_rates.empty()) {
        throw ConfigError("empty MLP search grid");
    }
    Split inner = detail::inner_holdout(train, inner_split_seed);
    MlpSearchResult result;
    bool have_best = false;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (int hidden : grid.mlp_hidden_dims) {
        for (double lr : grid.mlp_learning_rates) {
            SearchCell cell{static_cast<double>(hidden), lr, 0.0, false, ""};
            try {
                MlpConfig config = base;
                config.hidden_dim = hidden;
                config.learning_rate = lr;
                MlpModel model = fit_mlp(inner.train, config);
                cell.val_r2 = evaluate_r2(AggregatorModel{model}, inner.test);
                if (!have_best || cell.val_r2 > best_r2) {
                    best_r2 = cell.val_r2;
                    result.best = config;
                    have_best = true;
                }
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            result.table.push_back(std::move(cell));
        }
    }
    if (!have_best) throw DegenerateInput("every MLP search cell failed");
    return result;
}

// ---------------------------------------------------------------------------
// Importance stability
// ---------------------------------------------------------------------------

struct JudgeImportanceStats {
    double mean = 0.0;
    double stddev = 0.0;
    bool cv_defined = false;
    double cv = 0.0;
};

struct ImportanceStabilityReport {
    std::array<JudgeImportanceStats, kNumJudges> per_judge;
    std::vector<std::array<double, kNumJudges>> runs;  // raw per-run importances
    std::vector<GamConfig> run_configs;                // jittered config per run
};

/// Refits the GAM `runs` times under hyperparameter jitter (+-20% lambda,
/// +-2 splines, both clamped to their valid ranges) and summarizes the
/// per-judge importance distribution.
inline ImportanceStabilityReport importance_stability(std::span<const LabeledExample> train,
                                                      const GamConfig& base_config, int runs,
                                                      std::uint64_t jitter_seed) {
    validate(base_config);
    if (runs < 1) throw ConfigError("importance_stability needs at least one run");
    ImportanceStabilityReport report;
    report.runs.reserve(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        Rng rng(mix_seed(jitter_seed, "importance-jitter", static_cast<std::uint64_t>(r)));
        GamConfig jittered;
        jittered.lambda = std::clamp(
            rng.uniform(0.8 * base_config.lambda, 1.2 * base_config.lambda), 0.1, 100.0);
        int lo = std::max(5, base_config.n_splines - 2);
        int hi = std::min(10, base_config.n_splines + 2);
        jittered.n_splines =
            lo + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(hi - lo + 1)));
        report.run_configs.push_back(jittered);
        report.runs.push_back(gam_term_significance(fit_gam(train, jittered)));
    }
    const auto n_runs = static_cast<double>(runs);
    for (std::size_t j = 0; j < kNumJudges; ++j) {
        double mean = 0.0;
        for (const auto& run : report.runs) mean += run[j];
        mean /= n_runs;
        double var = 0.0;
        for (const auto& run : report.runs) var += (run[j] - mean) * (run[j] - mean);
        var = runs > 1 ? var / (n_runs - 1.0) : 0.0;
        JudgeImportanceStats stats;
        stats.mean = mean;
        stats.stddev = std::sqrt(var);
        if (mean > 0.0) {
            stats.cv_defined = true;
            stats.cv = stats.stddev / mean;
        }
        report.per_judge[j] = stats;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Permutation importance
// ---------------------------------------------------------------------------

/// Mean R^2 drop when one judge's test column is shuffled, averaged over
/// `repeats` seeded shuffles.
inline std::array<double, kNumJudges> permutation_importance(const AggregatorModel& model,
                                                             std::span<const LabeledExample> test,
                                                             std::uint64_t seed, int repeats = 5) {
    if (test.empty()) throw InsufficientData("permutation_importance needs a test set");
    const double baseline = evaluate_r2(model, test);
    std::vector<double> labels;
    labels.reserve(test.size());
    for (const auto& ex : test) labels.push_back(ex.label);

    std::array<double, kNumJudges> drops{};
    std::vector<LabeledExample> scratch(test.begin(), test.end());
    std::vector<std::size_t> perm(test.size());
    for (std::size_t j = 0; j < kNumJudges; ++j) {
        double total = 0.0;
        for (int r = 0; r < repeats; ++r) {
            Rng rng(mix_seed(seed, "permutation", (j << 16) | static_cast<std::uint64_t>(r)));
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            rng.shuffle(perm);
            for (std::size_t i = 0; i < scratch.size(); ++i) {
                scratch[i].features[j] = test[perm[i]].features[j];
            }
            total += baseline - r_squared(labels, predict_all(model, scratch));
        }
        for (std::size_t i = 0; i < scratch.size(); ++i) {
            scratch[i].features[j] = test[i].features[j];
        }
        drops[j] = total / static_cast<double>(repeats);
    }
    return drops;
}

}  // namespace judgeagg
