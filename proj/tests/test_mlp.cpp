#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/aggregators.hpp"
#include "judgeagg/mlp.hpp"
#include "judgeagg/rng.hpp"
#include "judgeagg/synthetic.hpp"

using namespace judgeagg;

namespace {

std::vector<LabeledExample> single_feature_fixture(std::size_t n, std::uint64_t seed) {
    // y = x_1 exactly (noiseless, single informative judge).
    Rng rng(seed);
    std::vector<LabeledExample> examples;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledExample ex;
        for (std::size_t j = 0; j < kNumJudges; ++j) ex.features[j] = rng.uniform(0.0, 4.0);
        ex.label = ex.features[0];
        examples.push_back(ex);
    }
    return examples;
}

}  // namespace

TEST_CASE("hidden width tracks dataset size") {
    CHECK(default_hidden_dim(200) == 32);
    CHECK(default_hidden_dim(999) == 32);
    CHECK(default_hidden_dim(1000) == 64);
    CHECK(default_hidden_dim(5000) == 64);
    CHECK(default_hidden_dim(5001) == 128);
}

TEST_CASE("training is bit-deterministic given the seed") {
    auto examples = single_feature_fixture(200, 40);
    MlpConfig config;
    config.hidden_dim = 32;
    config.max_epochs = 40;
    config.seed = 7;
    MlpModel a = fit_mlp(examples, config);
    MlpModel b = fit_mlp(examples, config);
    CHECK(a.w1 == b.w1);
    CHECK(a.b1 == b.b1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b2 == b.b2);
    config.seed = 8;
    MlpModel c = fit_mlp(examples, config);
    CHECK(a.w1 != c.w1);
}

TEST_CASE("a single informative judge is learned almost perfectly") {
    auto train = single_feature_fixture(800, 41);
    auto test = single_feature_fixture(300, 42);
    MlpConfig config;
    config.hidden_dim = 32;
    config.seed = 3;
    MlpModel model = fit_mlp(train, config);
    double r2 = evaluate_r2(AggregatorModel{model}, test);
    INFO("test R^2 " << r2);
    CHECK(r2 > 0.99);
}

TEST_CASE("analytic gradients match central finite differences") {
    // Relative error below 1e-4 against a 1e-5 step on the standardized
    // scale, for every parameter, on a seeded 5-example batch.
    auto examples = single_feature_fixture(64, 43);
    MlpConfig config;
    config.hidden_dim = 32;
    config.max_epochs = 3;
    config.seed = 11;
    MlpModel model = fit_mlp(examples, config);

    Eigen::MatrixXd x(kNumJudges, 5);
    Eigen::VectorXd y(5);
    Rng rng(44);
    for (int c = 0; c < 5; ++c) {
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            x(static_cast<Eigen::Index>(j), c) = rng.uniform(-1.5, 1.5);
        }
        y[c] = rng.uniform(0.0, 10.0);
    }
    MlpGradients analytic = mlp_gradients(model, x, y);

    const double step = 1e-5;
    auto check = [&](double analytic_value, double* parameter) {
        double saved = *parameter;
        *parameter = saved + step;
        double up = mlp_mse(model, x, y);
        *parameter = saved - step;
        double down = mlp_mse(model, x, y);
        *parameter = saved;
        double fd = (up - down) / (2.0 * step);
        double scale = std::max({std::abs(analytic_value), std::abs(fd), 1e-8});
        CHECK(std::abs(analytic_value - fd) / scale < 1e-4);
    };
    for (Eigen::Index r = 0; r < model.w1.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.w1.cols(); ++c) {
            check(analytic.w1(r, c), &model.w1(r, c));
        }
    }
    for (Eigen::Index r = 0; r < model.b1.size(); ++r) check(analytic.b1[r], &model.b1[r]);
    for (Eigen::Index r = 0; r < model.w2.size(); ++r) check(analytic.w2[r], &model.w2[r]);
    check(analytic.b2, &model.b2);
}

TEST_CASE("zeroed output weights predict the constant bias") {
    auto examples = single_feature_fixture(100, 45);
    MlpConfig config;
    config.hidden_dim = 32;
    config.max_epochs = 2;
    config.seed = 1;
    MlpModel model = fit_mlp(examples, config);
    model.w2.setZero();
    model.b2 = 4.5;
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        JudgeScoreVector f;
        for (std::size_t j = 0; j < kNumJudges; ++j) f[j] = rng.uniform(0.0, 4.0);
        CHECK(predict(AggregatorModel{model}, f) == 4.5);
    }
}

TEST_CASE("a runaway learning rate raises NonFiniteLoss") {
    // Adam's normalized updates keep moderate blowups finite; drive the
    // parameters past the double range to hit the guard.
    auto examples = single_feature_fixture(128, 46);
    MlpConfig config;
    config.hidden_dim = 32;
    config.learning_rate = 1e308;
    config.max_epochs = 50;
    config.seed = 2;
    CHECK_THROWS_AS(fit_mlp(examples, config), NonFiniteLoss);
}

TEST_CASE("config bounds are enforced") {
    auto examples = single_feature_fixture(100, 47);
    MlpConfig config;
    config.hidden_dim = 16;
    CHECK_THROWS_AS(fit_mlp(examples, config), ConfigError);
    config.hidden_dim = 256;
    CHECK_THROWS_AS(fit_mlp(examples, config), ConfigError);
    config.hidden_dim = 32;
    config.patience = 0;
    CHECK_THROWS_AS(fit_mlp(examples, config), ConfigError);
    config.patience = 15;
    CHECK_THROWS_AS(fit_mlp(single_feature_fixture(49, 48), config), InsufficientData);
}

TEST_CASE("MLP models survive serialization exactly") {
    auto examples = single_feature_fixture(120, 49);
    MlpConfig config;
    config.hidden_dim = 32;
    config.max_epochs = 10;
    config.seed = 9;
    MlpModel model = fit_mlp(examples, config);
    nlohmann::json j = model;
    auto restored = j.get<MlpModel>();
    CHECK(restored.w1 == model.w1);
    CHECK(restored.b1 == model.b1);
    CHECK(restored.w2 == model.w2);
    CHECK(restored.b2 == model.b2);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        JudgeScoreVector f;
        for (std::size_t k = 0; k < kNumJudges; ++k) f[k] = rng.uniform(0.0, 4.0);
        CHECK(restored.predict(f) == model.predict(f));
    }
}
