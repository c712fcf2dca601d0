#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/aggregators.hpp"
#include "judgeagg/linear.hpp"
#include "judgeagg/metrics.hpp"
#include "judgeagg/rng.hpp"

using namespace judgeagg;

namespace {

std::vector<LabeledExample> random_features(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledExample> examples(n);
    for (auto& ex : examples) {
        for (std::size_t j = 0; j < kNumJudges; ++j) ex.features[j] = rng.uniform(0.0, 4.0);
    }
    return examples;
}

}  // namespace

TEST_CASE("an exact linear relation is recovered to closed-form precision") {
    auto examples = random_features(200, 60);
    for (auto& ex : examples) ex.label = 2.0 * ex.features[0] + 1.0;
    LinearModel model = fit_linear(examples);
    CHECK(model.raw_coefficient(0) == Catch::Approx(2.0).margin(1e-6));
    for (std::size_t k = 1; k < kNumJudges; ++k) {
        CHECK(model.raw_coefficient(k) == Catch::Approx(0.0).margin(1e-6));
    }
    CHECK(model.raw_intercept() == Catch::Approx(1.0).margin(1e-6));
    for (const auto& ex : examples) {
        CHECK(model.predict(ex.features) == Catch::Approx(ex.label).margin(1e-6));
    }
}

TEST_CASE("standardized coefficients match a hand dot product") {
    auto examples = random_features(150, 61);
    Rng rng(62);
    for (auto& ex : examples) ex.label = rng.uniform(0.0, 10.0);
    LinearModel model = fit_linear(examples);
    for (int i = 0; i < 10; ++i) {
        const auto& ex = examples[static_cast<std::size_t>(i) * 7];
        double expected = model.intercept;
        for (std::size_t k = 0; k < kNumJudges; ++k) {
            const auto ki = static_cast<Eigen::Index>(k);
            expected += model.coefficients[ki] * (ex.features[k] - model.mean[ki]) /
                        model.stddev[ki];
        }
        CHECK(model.predict(ex.features) == expected);
    }
}

TEST_CASE("constant target gives zero coefficients and the mean intercept") {
    auto examples = random_features(100, 63);
    for (auto& ex : examples) ex.label = 3.25;
    LinearModel model = fit_linear(examples);
    for (std::size_t k = 0; k < kNumJudges; ++k) {
        CHECK(model.coefficients[static_cast<Eigen::Index>(k)] ==
              Catch::Approx(0.0).margin(1e-9));
    }
    CHECK(model.intercept == Catch::Approx(3.25));
}

TEST_CASE("duplicate feature columns stay solvable through the ridge") {
    auto examples = random_features(100, 64);
    for (auto& ex : examples) {
        ex.features[1] = ex.features[0];
        ex.label = ex.features[0];
    }
    LinearModel model = fit_linear(examples);
    for (const auto& ex : examples) {
        CHECK(std::isfinite(model.predict(ex.features)));
        CHECK(model.predict(ex.features) == Catch::Approx(ex.label).margin(1e-4));
    }
}

TEST_CASE("zero-variance features are dropped with zero coefficients") {
    auto examples = random_features(100, 65);
    for (auto& ex : examples) {
        ex.features[4] = 1.5;
        ex.label = ex.features[2];
    }
    LinearModel model = fit_linear(examples);
    REQUIRE(model.dropped.size() == 1);
    CHECK(model.dropped[0] == 4);
    CHECK(model.coefficients[4] == 0.0);
    CHECK(model.stddev[4] == 1.0);
}

TEST_CASE("single-feature variant needs only two examples") {
    std::vector<LabeledExample> examples(2);
    examples[0].features[3] = 1.0;
    examples[0].label = 2.0;
    examples[1].features[3] = 3.0;
    examples[1].label = 6.0;
    LinearModel model = fit_linear(examples, std::vector<std::size_t>{3});
    CHECK(model.feature_indices == std::vector<std::size_t>{3});
    CHECK(model.predict(examples[0].features) == Catch::Approx(2.0).margin(1e-6));
    CHECK(model.predict(examples[1].features) == Catch::Approx(6.0).margin(1e-6));
    CHECK_THROWS_AS(fit_linear(std::vector<LabeledExample>(10), std::nullopt),
                    InsufficientData);
}

TEST_CASE("heuristics scale [0,4] onto [0,10]") {
    JudgeScoreVector all4;
    JudgeScoreVector all0;
    JudgeScoreVector all2;
    for (std::size_t j = 0; j < kNumJudges; ++j) {
        all4[j] = 4.0;
        all0[j] = 0.0;
        all2[j] = 2.0;
    }
    for (auto kind : {HeuristicKind::ten_judge_mean(), HeuristicKind::ultrafeedback_four(),
                      HeuristicKind::best_single(JudgeId::Clarity)}) {
        CHECK(heuristic_aggregate(kind, all4) == 10.0);
        CHECK(heuristic_aggregate(kind, all0) == 0.0);
        CHECK(heuristic_aggregate(kind, all2) == 5.0);
    }
}

TEST_CASE("the UltraFeedback subset uses exactly its four judges") {
    JudgeScoreVector f;
    for (JudgeId j : kUltraFeedbackJudges) f[j] = 4.0;
    CHECK(heuristic_aggregate(HeuristicKind::ultrafeedback_four(), f) == 10.0);
    // Moving any non-subset judge changes nothing.
    f[JudgeId::Creativity] = 4.0;
    f[JudgeId::Clarity] = 4.0;
    CHECK(heuristic_aggregate(HeuristicKind::ultrafeedback_four(), f) == 10.0);
    JudgeScoreVector g;
    g[JudgeId::Truthfulness] = 4.0;
    CHECK(heuristic_aggregate(HeuristicKind::ultrafeedback_four(), g) == 2.5);
}

TEST_CASE("the ten-judge mean is permutation invariant") {
    Rng rng(66);
    for (int trial = 0; trial < 30; ++trial) {
        JudgeScoreVector f;
        for (std::size_t j = 0; j < kNumJudges; ++j) f[j] = rng.uniform(0.0, 4.0);
        JudgeScoreVector shuffled = f;
        std::vector<double> values(shuffled.scores.begin(), shuffled.scores.end());
        rng.shuffle(values);
        std::copy(values.begin(), values.end(), shuffled.scores.begin());
        CHECK(heuristic_aggregate(HeuristicKind::ten_judge_mean(), f) ==
              Catch::Approx(heuristic_aggregate(HeuristicKind::ten_judge_mean(), shuffled))
                  .margin(1e-12));
    }
}

TEST_CASE("select_best_judge finds the perfect correlate") {
    auto examples = random_features(200, 67);
    for (auto& ex : examples) ex.label = 2.5 * ex.features[JudgeId::Truthfulness];
    CHECK(select_best_judge(examples) == JudgeId::Truthfulness);
    for (auto& ex : examples) ex.label = 2.5 * ex.features[JudgeId::Conciseness];
    CHECK(select_best_judge(examples) == JudgeId::Conciseness);
}

TEST_CASE("select_best_judge breaks ties toward canonical order") {
    auto examples = random_features(100, 68);
    for (auto& ex : examples) {
        double v = ex.features[0];
        for (std::size_t j = 0; j < kNumJudges; ++j) ex.features[j] = v;
        ex.label = v;
    }
    CHECK(select_best_judge(examples) == JudgeId::Truthfulness);
    CHECK_THROWS_AS(select_best_judge(std::vector<LabeledExample>{}), InsufficientData);
}

TEST_CASE("select_best_judge agrees with a brute-force scan") {
    auto examples = random_features(300, 69);
    Rng rng(70);
    for (auto& ex : examples) {
        ex.label = 1.2 * ex.features[5] + 0.4 * ex.features[2] + rng.gaussian(0.0, 0.7);
        ex.label = std::clamp(ex.label, 0.0, 10.0);
    }
    std::vector<double> labels;
    for (const auto& ex : examples) labels.push_back(ex.label);
    JudgeId best = JudgeId::Truthfulness;
    double best_r2 = -1e300;
    for (JudgeId judge : kAllJudges) {
        std::vector<double> preds;
        for (const auto& ex : examples) preds.push_back(2.5 * ex.features[judge]);
        double r2 = r_squared(labels, preds);
        if (r2 > best_r2) {
            best_r2 = r2;
            best = judge;
        }
    }
    CHECK(select_best_judge(examples) == best);
}

TEST_CASE("linear and heuristic models survive serialization") {
    auto examples = random_features(120, 71);
    for (auto& ex : examples) ex.label = ex.features[1] * 2.0 + 0.5;
    AggregatorModel linear = fit_linear(examples);
    AggregatorModel heuristic = HeuristicModel{HeuristicKind::best_single(JudgeId::Honesty)};
    for (const AggregatorModel& model : {linear, heuristic}) {
        auto restored = deserialize_model(serialize_model(model));
        Rng rng(72);
        for (int i = 0; i < 20; ++i) {
            JudgeScoreVector f;
            for (std::size_t j = 0; j < kNumJudges; ++j) f[j] = rng.uniform(0.0, 4.0);
            CHECK(predict(restored, f) == predict(model, f));
        }
    }
}
