#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/ground_truth.hpp"

namespace judgeagg {

/// Z-score standardization followed by ordinary least squares. Coefficients
/// live on the standardized scale; zero-variance features are dropped (their
/// coefficient stays 0 and std is recorded as 1).
struct LinearModel {
    std::vector<std::size_t> feature_indices;  // judges used, canonical order
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    std::vector<std::size_t> dropped;  // positions within feature_indices

    double predict(const JudgeScoreVector& features) const {
        double out = intercept;
        for (std::size_t k = 0; k < feature_indices.size(); ++k) {
            const auto ki = static_cast<Eigen::Index>(k);
            out += coefficients[ki] * (features[feature_indices[k]] - mean[ki]) / stddev[ki];
        }
        return out;
    }

    /// Coefficient on the original (unstandardized) feature scale.
    double raw_coefficient(std::size_t position) const {
        const auto ki = static_cast<Eigen::Index>(position);
        return coefficients[ki] / stddev[ki];
    }

    /// Intercept on the original feature scale.
    double raw_intercept() const {
        double out = intercept;
        for (std::size_t k = 0; k < feature_indices.size(); ++k) {
            const auto ki = static_cast<Eigen::Index>(k);
            out -= coefficients[ki] * mean[ki] / stddev[ki];
        }
        return out;
    }
};

/// Normal equations with a tiny ridge (1e-8) for conditioning, so duplicate
/// columns still solve.
inline LinearModel fit_linear(std::span<const LabeledExample> examples,
                              std::optional<std::vector<std::size_t>> feature_subset = {}) {
    std::vector<std::size_t> indices;
    if (feature_subset) {
        indices = *feature_subset;
    } else {
        for (std::size_t j = 0; j < kNumJudges; ++j) indices.push_back(j);
    }
    if (indices.empty()) throw ConfigError("fit_linear needs at least one feature");
    const std::size_t n = examples.size();
    if (n < indices.size() + 1) {
        throw InsufficientData("fit_linear needs more examples than features");
    }
    const auto p = static_cast<Eigen::Index>(indices.size());
    const auto rows = static_cast<Eigen::Index>(n);

    Eigen::MatrixXd x(rows, p);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) {
            x(i, k) = examples[static_cast<std::size_t>(i)]
                          .features[indices[static_cast<std::size_t>(k)]];
        }
        y[i] = examples[static_cast<std::size_t>(i)].label;
    }

    LinearModel model;
    model.feature_indices = std::move(indices);
    model.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
    Eigen::VectorXd var = centered.array().square().colwise().mean();
    model.stddev.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        if (var[k] < 1e-12) {
            model.stddev[k] = 1.0;  // dropped feature; coefficient forced to 0
            model.dropped.push_back(static_cast<std::size_t>(k));
        } else {
            model.stddev[k] = std::sqrt(var[k]);
        }
    }
    Eigen::MatrixXd x_std = centered.array().rowwise() / model.stddev.transpose().array();
    for (std::size_t k : model.dropped) x_std.col(static_cast<Eigen::Index>(k)).setZero();

    model.intercept = y.mean();
    Eigen::VectorXd centered_y = y.array() - model.intercept;
    Eigen::MatrixXd gram = x_std.transpose() * x_std;
    gram.diagonal().array() += 1e-8;
    model.coefficients = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(x_std.transpose() * centered_y);
    for (std::size_t k : model.dropped) model.coefficients[static_cast<Eigen::Index>(k)] = 0.0;
    return model;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const LinearModel& m) {
    j = nlohmann::json{
        {"feature_indices", m.feature_indices},
        {"mean", std::vector<double>(m.mean.begin(), m.mean.end())},
        {"stddev", std::vector<double>(m.stddev.begin(), m.stddev.end())},
        {"coefficients", std::vector<double>(m.coefficients.begin(), m.coefficients.end())},
        {"intercept", m.intercept},
        {"dropped", m.dropped}};
}

inline void from_json(const nlohmann::json& j, LinearModel& m) {
    j.at("feature_indices").get_to(m.feature_indices);
    auto load_vec = [&](const char* key) {
        auto v = j.at(key).get<std::vector<double>>();
        return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
    };
    m.mean = load_vec("mean");
    m.stddev = load_vec("stddev");
    m.coefficients = load_vec("coefficients");
    j.at("intercept").get_to(m.intercept);
    j.at("dropped").get_to(m.dropped);
}

}  // namespace judgeagg
