#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/aggregators.hpp"
#include "judgeagg/gam.hpp"
#include "judgeagg/synthetic.hpp"

using namespace judgeagg;

namespace {

std::vector<LabeledExample> additive_fixture(std::size_t n, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.kind = SyntheticSpec::Kind::Additive;
    spec.n = n;
    spec.seed = seed;
    spec.noise_sigma = 0.6;
    return generate_synthetic_examples(spec);
}

JudgeScoreVector features_at(double value) {
    JudgeScoreVector f;
    for (std::size_t j = 0; j < kNumJudges; ++j) f[j] = value;
    return f;
}

}  // namespace

TEST_CASE("constant target yields the intercept and null terms") {
    Rng rng(5);
    std::vector<LabeledExample> examples;
    for (int i = 0; i < 200; ++i) {
        LabeledExample ex;
        for (std::size_t j = 0; j < kNumJudges; ++j) ex.features[j] = rng.uniform(0.0, 4.0);
        ex.label = 6.25;
        examples.push_back(ex);
    }
    GamModel model = fit_gam(examples, GamConfig{6, 1.0});
    CHECK(model.intercept == Catch::Approx(6.25));
    for (int i = 0; i < 20; ++i) {
        CHECK(model.predict(features_at(rng.uniform(0.0, 4.0))) ==
              Catch::Approx(6.25).margin(1e-6));
    }
    for (const auto& term : model.terms) {
        CHECK(term.p_value == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("fitted terms recover the generating functions") {
    SyntheticSpec spec;
    spec.kind = SyntheticSpec::Kind::Additive;
    spec.n = 1500;
    spec.seed = 11;
    spec.noise_sigma = 0.6;
    auto examples = generate_synthetic_examples(spec);
    GamModel model = fit_gam(examples, GamConfig{8, 1.0});

    // Oracle: the generating terms, centered the same way the fit centers
    // (mean over the training inputs).
    for (std::size_t j : kAdditiveInformativeJudges) {
        double oracle_mean = 0.0;
        for (const auto& ex : examples) {
            oracle_mean += additive_truth_term(spec, j, ex.features[j]);
        }
        oracle_mean /= static_cast<double>(examples.size());
        double max_dev = 0.0;
        for (const auto& ex : examples) {
            double fitted = model.terms[j].value(ex.features[j]);
            double oracle = additive_truth_term(spec, j, ex.features[j]) - oracle_mean;
            max_dev = std::max(max_dev, std::abs(fitted - oracle));
        }
        INFO("judge " << j << " max deviation " << max_dev << " sigma "
                      << model.residual_sd);
        CHECK(max_dev < 3.0 * model.residual_sd);
    }
}

TEST_CASE("heavy smoothing flattens term curvature") {
    auto examples = additive_fixture(800, 21);
    GamModel wiggly = fit_gam(examples, GamConfig{5, 0.1});
    GamModel smooth = fit_gam(examples, GamConfig{5, 100.0});
    auto max_curvature = [](const GamModel& model, std::size_t judge) {
        const auto& term = model.terms[judge];
        double worst = 0.0;
        const double h = (term.train_hi - term.train_lo) / 40.0;
        for (int i = 1; i < 40; ++i) {
            double x = term.train_lo + h * i;
            double second = term.value(x - h) - 2.0 * term.value(x) + term.value(x + h);
            worst = std::max(worst, std::abs(second));
        }
        return worst;
    };
    // The tanh term is genuinely curved; lambda = 100 must flatten it
    // relative to lambda = 0.1.
    CHECK(max_curvature(smooth, 0) < max_curvature(wiggly, 0));
}

TEST_CASE("prediction is exactly intercept plus per-term values") {
    auto examples = additive_fixture(400, 3);
    GamModel model = fit_gam(examples, GamConfig{7, 2.0});
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        JudgeScoreVector f;
        for (std::size_t j = 0; j < kNumJudges; ++j) f[j] = rng.uniform(-1.0, 5.0);
        double total = model.intercept;
        for (std::size_t j = 0; j < kNumJudges; ++j) total += model.terms[j].value(f[j]);
        CHECK(model.predict(f) == total);
    }
}

TEST_CASE("inputs differing in one judge move the prediction by that term only") {
    auto examples = additive_fixture(400, 4);
    GamModel model = fit_gam(examples, GamConfig{6, 1.0});
    Rng rng(10);
    for (int i = 0; i < 50; ++i) {
        JudgeScoreVector u;
        for (std::size_t j = 0; j < kNumJudges; ++j) u[j] = rng.uniform(0.0, 4.0);
        std::size_t moved = rng.uniform_below(kNumJudges);
        JudgeScoreVector v = u;
        v[moved] = rng.uniform(0.0, 4.0);
        double expected = model.terms[moved].value(u[moved]) - model.terms[moved].value(v[moved]);
        CHECK(model.predict(u) - model.predict(v) == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("out-of-range inputs follow the linear boundary extension") {
    auto examples = additive_fixture(400, 6);
    GamModel model = fit_gam(examples, GamConfig{6, 1.0});
    const auto& term = model.terms[0];
    const double hi = term.train_hi;
    double v1 = term.value(hi + 0.5);
    double v2 = term.value(hi + 1.0);
    double v3 = term.value(hi + 1.5);
    CHECK(v2 - v1 == Catch::Approx(v3 - v2).margin(1e-9));  // collinear
    const double lo = term.train_lo;
    double w1 = term.value(lo - 0.5);
    double w2 = term.value(lo - 1.0);
    double w3 = term.value(lo - 1.5);
    CHECK(w1 - w2 == Catch::Approx(w2 - w3).margin(1e-9));
}

TEST_CASE("constant feature columns become null terms, not failures") {
    auto examples = additive_fixture(300, 8);
    for (auto& ex : examples) ex.features[9] = 2.0;
    GamModel model = fit_gam(examples, GamConfig{6, 1.0});
    CHECK(model.terms[9].constant);
    CHECK(model.terms[9].p_value == 1.0);
    CHECK(model.terms[9].value(0.0) == 0.0);
    CHECK(model.terms[9].value(4.0) == 0.0);
    CHECK(gam_term_significance(model)[9] == Catch::Approx(0.0));
}

TEST_CASE("term significance is one minus the p-value") {
    auto examples = additive_fixture(400, 12);
    GamModel model = fit_gam(examples, GamConfig{6, 1.0});
    auto importance = gam_term_significance(model);
    for (std::size_t j = 0; j < kNumJudges; ++j) {
        CHECK(importance[j] == 1.0 - model.terms[j].p_value);
        CHECK(model.terms[j].p_value >= 0.0);
        CHECK(model.terms[j].p_value <= 1.0);
    }
    GamModel synthetic_p = model;
    synthetic_p.terms[0].p_value = 0.05;
    CHECK(gam_term_significance(synthetic_p)[0] == Catch::Approx(0.95));
}

TEST_CASE("informative judges outrank uninformative ones") {
    auto examples = additive_fixture(1500, 13);
    GamModel model = fit_gam(examples, GamConfig{8, 1.0});
    auto importance = gam_term_significance(model);
    double weakest_informative = 1.0;
    for (std::size_t j : kAdditiveInformativeJudges) {
        weakest_informative = std::min(weakest_informative, importance[j]);
    }
    for (std::size_t j = 3; j < kNumJudges; ++j) {
        INFO("uninformative judge " << j << " importance " << importance[j]);
        CHECK(importance[j] < weakest_informative);
    }
}

TEST_CASE("fit_gam rejects tiny datasets and bad configs") {
    auto examples = additive_fixture(49, 14);
    CHECK_THROWS_AS(fit_gam(examples, GamConfig{6, 1.0}), InsufficientData);
    auto enough = additive_fixture(60, 14);
    CHECK_THROWS_AS(fit_gam(enough, GamConfig{4, 1.0}), ConfigError);
    CHECK_THROWS_AS(fit_gam(enough, GamConfig{11, 1.0}), ConfigError);
    CHECK_THROWS_AS(fit_gam(enough, GamConfig{6, 0.05}), ConfigError);
    CHECK_THROWS_AS(fit_gam(enough, GamConfig{6, 101.0}), ConfigError);
}

TEST_CASE("fitting is deterministic") {
    auto examples = additive_fixture(300, 15);
    GamModel a = fit_gam(examples, GamConfig{7, 3.0});
    GamModel b = fit_gam(examples, GamConfig{7, 3.0});
    Rng rng(1);
    for (int i = 0; i < 30; ++i) {
        JudgeScoreVector f;
        for (std::size_t j = 0; j < kNumJudges; ++j) f[j] = rng.uniform(0.0, 4.0);
        CHECK(a.predict(f) == b.predict(f));
    }
}

TEST_CASE("GAM models survive serialization exactly") {
    auto examples = additive_fixture(300, 16);
    GamModel model = fit_gam(examples, GamConfig{6, 2.5});
    nlohmann::json j = model;
    auto restored = j.get<GamModel>();
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        JudgeScoreVector f;
        for (std::size_t k = 0; k < kNumJudges; ++k) f[k] = rng.uniform(-1.0, 5.0);
        CHECK(restored.predict(f) == model.predict(f));
    }
    CHECK(nlohmann::json(restored).dump() == j.dump());
}
