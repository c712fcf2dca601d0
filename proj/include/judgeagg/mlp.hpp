#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/rng.hpp"

namespace judgeagg {

struct MlpConfig {
    int hidden_dim = 0;  // 0 = pick from dataset size
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 500;
    int patience = 15;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
};

/// Hidden width grows with dataset size within the 32-128 band.
inline int default_hidden_dim(std::size_t n_examples) {
    if (n_examples < 1000) return 32;
    if (n_examples <= 5000) return 64;
    return 128;
}

inline void validate(const MlpConfig& config, std::size_t n_examples) {
    int hidden = config.hidden_dim == 0 ? default_hidden_dim(n_examples) : config.hidden_dim;
    if (hidden < 32 || hidden > 128) throw ConfigError("MLP hidden_dim must lie in [32, 128]");
    if (config.patience < 1) throw ConfigError("MLP patience must be >= 1");
    if (config.batch_size < 1) throw ConfigError("MLP batch_size must be >= 1");
    if (config.validation_fraction < 0.0 || config.validation_fraction >= 1.0) {
        throw ConfigError("MLP validation_fraction must lie in [0, 1)");
    }
}

/// One hidden ReLU layer: f(x) = w2 . relu(W1 x~ + b1) + b2 on standardized
/// inputs x~.
struct MlpModel {
    Eigen::MatrixXd w1;  // hidden x 10
    Eigen::VectorXd b1;  // hidden
    Eigen::VectorXd w2;  // hidden
    double b2 = 0.0;
    Eigen::VectorXd feature_mean;  // 10
    Eigen::VectorXd feature_std;   // 10
    MlpConfig config;

    Eigen::VectorXd standardize(const JudgeScoreVector& features) const {
        Eigen::VectorXd x(kNumJudges);
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            x[static_cast<Eigen::Index>(j)] = (features[j] - feature_mean[j]) / feature_std[j];
        }
        return x;
    }

    double predict(const JudgeScoreVector& features) const {
        Eigen::VectorXd h = (w1 * standardize(features) + b1).cwiseMax(0.0);
        return w2.dot(h) + b2;
    }

    /// Forward pass over standardized rows (one example per column).
    Eigen::VectorXd forward(const Eigen::MatrixXd& x_std) const {
        Eigen::MatrixXd h = ((w1 * x_std).colwise() + b1).cwiseMax(0.0);
        return (w2.transpose() * h).transpose().array() + b2;
    }
};

struct MlpGradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;
    double b2 = 0.0;
};

inline double mlp_mse(const MlpModel& model, const Eigen::MatrixXd& x_std,
                      const Eigen::VectorXd& y) {
    return (model.forward(x_std) - y).squaredNorm() / static_cast<double>(y.size());
}

/// Analytic gradient of the batch MSE with respect to every parameter.
inline MlpGradients mlp_gradients(const MlpModel& model, const Eigen::MatrixXd& x_std,
                                  const Eigen::VectorXd& y) {
    const auto batch = static_cast<double>(y.size());
    Eigen::MatrixXd z = (model.w1 * x_std).colwise() + model.b1;
    Eigen::MatrixXd h = z.cwiseMax(0.0);
    Eigen::VectorXd pred = (model.w2.transpose() * h).transpose().array() + model.b2;
    Eigen::VectorXd dpred = 2.0 * (pred - y) / batch;

    MlpGradients g;
    g.w2 = h * dpred;
    g.b2 = dpred.sum();
    Eigen::MatrixXd dh = model.w2 * dpred.transpose();
    Eigen::MatrixXd dz = (z.array() > 0.0).select(dh, 0.0);
    g.w1 = dz * x_std.transpose();
    g.b1 = dz.rowwise().sum();
    return g;
}

/// Mini-batch Adam on MSE with a seeded validation holdout and patience-based
/// early stopping; the best-validation weights are restored before returning.
/// Deterministic given (data, config, seed).
inline MlpModel fit_mlp(std::span<const LabeledExample> examples, const MlpConfig& config) {
    const std::size_t n = examples.size();
    if (n < 50) throw InsufficientData("fit_mlp needs at least 50 examples");
    validate(config, n);
    const int hidden = config.hidden_dim == 0 ? default_hidden_dim(n) : config.hidden_dim;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng split_rng(mix_seed(config.seed, "mlp-val-split"));
    split_rng.shuffle(order);
    std::size_t n_val = 0;
    if (config.validation_fraction > 0.0) {
        n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) *
                                                    config.validation_fraction));
        n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));
    }
    const std::size_t n_train = n - n_val;

    // Standardization statistics come from the inner training portion only.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kNumJudges);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(kNumJudges);
    for (std::size_t i = 0; i < n_train; ++i) {
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            mean[static_cast<Eigen::Index>(j)] += examples[order[i]].features[j];
        }
    }
    mean /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            double d = examples[order[i]].features[j] - mean[static_cast<Eigen::Index>(j)];
            var[static_cast<Eigen::Index>(j)] += d * d;
        }
    }
    var /= static_cast<double>(n_train);
    Eigen::VectorXd stddev = var.array().sqrt().max(1e-12);

    auto matrixize = [&](std::size_t begin, std::size_t count, Eigen::MatrixXd& x,
                         Eigen::VectorXd& y) {
        x.resize(kNumJudges, static_cast<Eigen::Index>(count));
        y.resize(static_cast<Eigen::Index>(count));
        for (std::size_t i = 0; i < count; ++i) {
            const auto& ex = examples[order[begin + i]];
            for (std::size_t j = 0; j < kNumJudges; ++j) {
                x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                    (ex.features[j] - mean[static_cast<Eigen::Index>(j)]) /
                    stddev[static_cast<Eigen::Index>(j)];
            }
            y[static_cast<Eigen::Index>(i)] = ex.label;
        }
    };
    Eigen::MatrixXd x_train, x_val;
    Eigen::VectorXd y_train, y_val;
    matrixize(0, n_train, x_train, y_train);
    if (n_val > 0) matrixize(n_train, n_val, x_val, y_val);

    // Optimize against standardized targets, then fold the label scale back
    // into the output layer. Raw labels sit far from the zero-initialized
    // network output, and Adam's per-step displacement is bounded by the
    // learning rate, so the bias would otherwise spend thousands of steps
    // crawling to the label mean.
    const double label_mean = y_train.mean();
    double label_sd = std::sqrt((y_train.array() - label_mean).square().sum() /
                                static_cast<double>(n_train));
    if (label_sd < 1e-12) label_sd = 1.0;
    y_train = (y_train.array() - label_mean) / label_sd;
    if (n_val > 0) y_val = (y_val.array() - label_mean) / label_sd;

    MlpModel model;
    model.config = config;
    model.config.hidden_dim = hidden;
    model.feature_mean = mean;
    model.feature_std = stddev;
    Rng init_rng(mix_seed(config.seed, "mlp-init"));
    const double limit1 = std::sqrt(6.0 / static_cast<double>(kNumJudges));
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden));
    model.w1.resize(hidden, kNumJudges);
    for (Eigen::Index r = 0; r < model.w1.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.w1.cols(); ++c) {
            model.w1(r, c) = init_rng.uniform(-limit1, limit1);
        }
    }
    model.b1 = Eigen::VectorXd::Zero(hidden);
    model.w2.resize(hidden);
    for (Eigen::Index r = 0; r < hidden; ++r) model.w2[r] = init_rng.uniform(-limit2, limit2);
    model.b2 = 0.0;

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    MlpGradients m1{Eigen::MatrixXd::Zero(hidden, kNumJudges), Eigen::VectorXd::Zero(hidden),
                    Eigen::VectorXd::Zero(hidden), 0.0};
    MlpGradients m2 = m1;
    long step = 0;

    auto adam_update = [&](const MlpGradients& g) {
        ++step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        auto apply = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
            mom = kBeta1 * mom + (1.0 - kBeta1) * grad;
            vel = kBeta2 * vel.array().matrix() +
                  (1.0 - kBeta2) * grad.array().square().matrix();
            param -= (config.learning_rate * (mom / c1).array() /
                      ((vel / c2).array().sqrt() + kEps))
                         .matrix();
        };
        apply(model.w1, m1.w1, m2.w1, g.w1);
        apply(model.b1, m1.b1, m2.b1, g.b1);
        apply(model.w2, m1.w2, m2.w2, g.w2);
        m1.b2 = kBeta1 * m1.b2 + (1.0 - kBeta1) * g.b2;
        m2.b2 = kBeta2 * m2.b2 + (1.0 - kBeta2) * g.b2 * g.b2;
        model.b2 -= config.learning_rate * (m1.b2 / c1) / (std::sqrt(m2.b2 / c2) + kEps);
    };

    MlpModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    std::vector<Eigen::Index> batch_order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) batch_order[i] = static_cast<Eigen::Index>(i);
    Rng epoch_rng(mix_seed(config.seed, "mlp-epochs"));

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        epoch_rng.shuffle(batch_order);
        for (std::size_t start = 0; start < n_train;
             start += static_cast<std::size_t>(config.batch_size)) {
            const auto count = static_cast<Eigen::Index>(
                std::min<std::size_t>(config.batch_size, n_train - start));
            Eigen::MatrixXd xb(kNumJudges, count);
            Eigen::VectorXd yb(count);
            for (Eigen::Index i = 0; i < count; ++i) {
                xb.col(i) = x_train.col(batch_order[start + static_cast<std::size_t>(i)]);
                yb[i] = y_train[batch_order[start + static_cast<std::size_t>(i)]];
            }
            adam_update(mlp_gradients(model, xb, yb));
        }
        double monitored = n_val > 0 ? mlp_mse(model, x_val, y_val)
                                     : mlp_mse(model, x_train, y_train);
        if (!std::isfinite(monitored)) {
            throw NonFiniteLoss("MLP loss diverged at epoch " + std::to_string(epoch));
        }
        if (monitored < best_val) {
            best_val = monitored;
            best = model;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= config.patience) {
            break;
        }
    }
    best.w2 *= label_sd;
    best.b2 = best.b2 * label_sd + label_mean;
    return best;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const MlpConfig& c) {
    j = nlohmann::json{{"hidden_dim", c.hidden_dim},
                       {"learning_rate", c.learning_rate},
                       {"batch_size", c.batch_size},
                       {"max_epochs", c.max_epochs},
                       {"patience", c.patience},
                       {"validation_fraction", c.validation_fraction},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, MlpConfig& c) {
    j.at("hidden_dim").get_to(c.hidden_dim);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("batch_size").get_to(c.batch_size);
    j.at("max_epochs").get_to(c.max_epochs);
    j.at("patience").get_to(c.patience);
    j.at("validation_fraction").get_to(c.validation_fraction);
    j.at("seed").get_to(c.seed);
}

namespace detail {
inline std::vector<double> flatten(const Eigen::MatrixXd& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const MlpModel& m) {
    j = nlohmann::json{{"config", m.config},
                       {"hidden_dim", m.w1.rows()},
                       {"w1", detail::flatten(m.w1)},
                       {"b1", detail::flatten(m.b1)},
                       {"w2", detail::flatten(m.w2)},
                       {"b2", m.b2},
                       {"feature_mean", detail::flatten(m.feature_mean)},
                       {"feature_std", detail::flatten(m.feature_std)}};
}

inline void from_json(const nlohmann::json& j, MlpModel& m) {
    j.at("config").get_to(m.config);
    const auto hidden = j.at("hidden_dim").get<Eigen::Index>();
    auto w1 = j.at("w1").get<std::vector<double>>();
    m.w1 = Eigen::Map<Eigen::MatrixXd>(w1.data(), hidden, kNumJudges);
    auto load_vec = [&](const char* key) {
        auto v = j.at(key).get<std::vector<double>>();
        return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
    };
    m.b1 = load_vec("b1");
    m.w2 = load_vec("w2");
    j.at("b2").get_to(m.b2);
    m.feature_mean = load_vec("feature_mean");
    m.feature_std = load_vec("feature_std");
}

}  // namespace judgeagg
