#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/ground_truth.hpp"
#include "judgeagg/splines.hpp"

namespace judgeagg {

struct GamConfig {
    int n_splines = 8;      // cubic B-spline basis functions per judge
    double lambda = 10.0;   // second-order difference penalty weight
};

inline void validate(const GamConfig& config) {
    if (config.n_splines < 5 || config.n_splines > 10) {
        throw ConfigError("GAM n_splines must lie in [5, 10]");
    }
    if (config.lambda < 0.1 || config.lambda > 100.0) {
        throw ConfigError("GAM lambda must lie in [0.1, 100]");
    }
}

/// One judge's smooth term. Raw spline coefficients plus the training-mean
/// offset that centers the term (sum-to-zero over training data).
struct GamTerm {
    bool constant = false;  // degenerate training column; term is identically 0
    UniformBSplineBasis basis;
    Eigen::VectorXd coefficients;
    double center_offset = 0.0;
    double edf = 0.0;
    double p_value = 1.0;
    double train_lo = 0.0;
    double train_hi = 0.0;

    /// Centered term value with linear extension beyond the training range;
    /// bias transforms routinely push inputs outside it and polynomial
    /// extrapolation would explode there.
    double value(double x) const {
        if (constant) return 0.0;
        std::vector<double> buf(static_cast<std::size_t>(basis.num_basis()));
        auto raw_at = [&](double z) {
            basis.evaluate(z, buf);
            double s = 0.0;
            for (int i = 0; i < basis.num_basis(); ++i) s += buf[i] * coefficients[i];
            return s;
        };
        auto slope_at = [&](double z) {
            basis.evaluate_derivative(z, buf);
            double s = 0.0;
            for (int i = 0; i < basis.num_basis(); ++i) s += buf[i] * coefficients[i];
            return s;
        };
        double raw;
        if (x < train_lo) {
            raw = raw_at(train_lo) + slope_at(train_lo) * (x - train_lo);
        } else if (x > train_hi) {
            raw = raw_at(train_hi) + slope_at(train_hi) * (x - train_hi);
        } else {
            raw = raw_at(x);
        }
        return raw - center_offset;
    }
};

struct GamModel {
    GamConfig config;
    double intercept = 0.0;
    std::array<GamTerm, kNumJudges> terms;
    double residual_sd = 0.0;
    double edf_total = 0.0;

    /// Prediction is exactly intercept + sum of per-term values.
    double predict(const JudgeScoreVector& features) const {
        double out = intercept;
        for (std::size_t j = 0; j < kNumJudges; ++j) out += terms[j].value(features[j]);
        return out;
    }
};

/// Penalized least squares for the additive model: basis columns are centered
/// against their training means (so each term sums to zero over the data and
/// the intercept is free), and the coefficient blocks carry a shared
/// second-difference penalty scaled by lambda. A tiny ridge keeps the
/// constant-coefficient direction of each block, which centering maps to
/// zero, solvable.
inline GamModel fit_gam(std::span<const LabeledExample> examples, const GamConfig& config) {
    validate(config);
    const auto n = static_cast<Eigen::Index>(examples.size());
    if (n < 50) throw InsufficientData("fit_gam needs at least 50 examples");

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = examples[i].label;
    const double y_mean = y.mean();

    GamModel model;
    model.config = config;
    model.intercept = y_mean;

    const int m = config.n_splines;
    struct ActiveTerm {
        std::size_t judge;
        int offset;  // first column of this block
    };
    std::vector<ActiveTerm> active;
    int total_cols = 0;
    for (std::size_t j = 0; j < kNumJudges; ++j) {
        double lo = examples[0].features[j];
        double hi = lo;
        for (const auto& ex : examples) {
            lo = std::min(lo, ex.features[j]);
            hi = std::max(hi, ex.features[j]);
        }
        GamTerm& term = model.terms[j];
        term.train_lo = lo;
        term.train_hi = hi;
        if (hi - lo < 1e-9) {
            term.constant = true;  // null term: spline 0, p-value 1
            continue;
        }
        term.basis = UniformBSplineBasis(lo, hi, m);
        active.push_back({j, total_cols});
        total_cols += m;
    }

    if (active.empty()) {
        model.residual_sd = std::sqrt((y.array() - y_mean).square().sum() /
                                      std::max<double>(1.0, static_cast<double>(n - 1)));
        return model;
    }

    Eigen::MatrixXd design(n, total_cols);
    std::vector<double> row(static_cast<std::size_t>(m));
    for (const ActiveTerm& at : active) {
        const auto& basis = model.terms[at.judge].basis;
        for (Eigen::Index i = 0; i < n; ++i) {
            basis.evaluate(examples[i].features[at.judge], row);
            for (int c = 0; c < m; ++c) design(i, at.offset + c) = row[c];
        }
    }
    Eigen::RowVectorXd col_means = design.colwise().mean();
    design.rowwise() -= col_means;

    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::MatrixXd penalized = gram;
    const Eigen::MatrixXd block_penalty = second_difference_penalty(m);
    for (const ActiveTerm& at : active) {
        penalized.block(at.offset, at.offset, m, m) += config.lambda * block_penalty;
    }
    penalized.diagonal().array() += 1e-8;

    Eigen::LDLT<Eigen::MatrixXd> solver(penalized);
    Eigen::VectorXd centered_y = y.array() - y_mean;
    Eigen::VectorXd beta = solver.solve(design.transpose() * centered_y);

    // Effective degrees of freedom per block from the smoother influence:
    // edf_j = tr of block j of (X'X + lambda P)^-1 X'X.
    Eigen::MatrixXd influence = solver.solve(gram);

    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(n, y_mean);
    std::vector<Eigen::VectorXd> term_fits(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
        term_fits[a] = design.middleCols(active[a].offset, m) * beta.segment(active[a].offset, m);
        fitted += term_fits[a];
    }
    const double rss = (y - fitted).squaredNorm();

    double edf_total = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
        double edf = influence.block(active[a].offset, active[a].offset, m, m).trace();
        model.terms[active[a].judge].edf = edf;
        edf_total += edf;
    }
    model.edf_total = edf_total + 1.0;  // + intercept
    const double resid_dof = std::max(1.0, static_cast<double>(n) - model.edf_total);
    const double sigma2 = rss / resid_dof;
    model.residual_sd = std::sqrt(sigma2);

    // Approximate F-test per term: the term's fitted sum of squares on its
    // effective dof against the residual scale.
    for (std::size_t a = 0; a < active.size(); ++a) {
        GamTerm& term = model.terms[active[a].judge];
        term.coefficients = beta.segment(active[a].offset, m);
        term.center_offset = col_means.segment(active[a].offset, m).dot(term.coefficients);
        if (term.edf < 1e-6 || sigma2 <= 0.0) {
            term.p_value = 1.0;
            continue;
        }
        double f_stat = term_fits[a].squaredNorm() / term.edf / sigma2;
        if (!std::isfinite(f_stat) || f_stat <= 0.0) {
            term.p_value = 1.0;
            continue;
        }
        boost::math::fisher_f_distribution<double> dist(term.edf, resid_dof);
        term.p_value = boost::math::cdf(boost::math::complement(dist, f_stat));
    }
    return model;
}

/// Importance of each judge as 1 - p_value of its smooth term.
inline std::array<double, kNumJudges> gam_term_significance(const GamModel& model) {
    std::array<double, kNumJudges> importance{};
    for (std::size_t j = 0; j < kNumJudges; ++j) importance[j] = 1.0 - model.terms[j].p_value;
    return importance;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const GamConfig& c) {
    j = nlohmann::json{{"n_splines", c.n_splines}, {"lambda", c.lambda}};
}

inline void from_json(const nlohmann::json& j, GamConfig& c) {
    j.at("n_splines").get_to(c.n_splines);
    j.at("lambda").get_to(c.lambda);
}

inline void to_json(nlohmann::json& j, const GamTerm& t) {
    j = nlohmann::json{{"constant", t.constant},
                       {"edf", t.edf},
                       {"p_value", t.p_value},
                       {"train_lo", t.train_lo},
                       {"train_hi", t.train_hi}};
    if (!t.constant) {
        j["num_basis"] = t.basis.num_basis();
        j["center_offset"] = t.center_offset;
        j["coefficients"] = std::vector<double>(t.coefficients.begin(), t.coefficients.end());
    }
}

inline void from_json(const nlohmann::json& j, GamTerm& t) {
    j.at("constant").get_to(t.constant);
    j.at("edf").get_to(t.edf);
    j.at("p_value").get_to(t.p_value);
    j.at("train_lo").get_to(t.train_lo);
    j.at("train_hi").get_to(t.train_hi);
    if (!t.constant) {
        t.basis = UniformBSplineBasis(t.train_lo, t.train_hi, j.at("num_basis").get<int>());
        j.at("center_offset").get_to(t.center_offset);
        auto coefs = j.at("coefficients").get<std::vector<double>>();
        t.coefficients = Eigen::Map<Eigen::VectorXd>(coefs.data(),
                                                     static_cast<Eigen::Index>(coefs.size()));
    }
}

inline void to_json(nlohmann::json& j, const GamModel& m) {
    j = nlohmann::json{{"config", m.config},
                       {"intercept", m.intercept},
                       {"residual_sd", m.residual_sd},
                       {"edf_total", m.edf_total}};
    nlohmann::json terms = nlohmann::json::object();
    for (std::size_t i = 0; i < kNumJudges; ++i) {
        terms[std::string(kJudgeNames[i])] = m.terms[i];
    }
    j["terms"] = std::move(terms);
}

inline void from_json(const nlohmann::json& j, GamModel& m) {
    j.at("config").get_to(m.config);
    j.at("intercept").get_to(m.intercept);
    j.at("residual_sd").get_to(m.residual_sd);
    j.at("edf_total").get_to(m.edf_total);
    for (std::size_t i = 0; i < kNumJudges; ++i) {
        j.at("terms").at(std::string(kJudgeNames[i])).get_to(m.terms[i]);
    }
}

}  // namespace judgeagg
