#pragma once

#include <cmath>
#include <span>

#include "judgeagg/errors.hpp"

namespace judgeagg {

/// Coefficient of determination 1 - SS_res / SS_tot with SS_tot centered on
/// mean(y_true). May be negative for predictors worse than the mean.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size()) {
        throw DegenerateInput("r_squared needs equal non-zero lengths");
    }
    double mean = 0.0;
    for (double v : y_true) mean += v;
    mean /= static_cast<double>(y_true.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    }
    if (ss_tot <= 0.0) throw DegenerateInput("r_squared undefined for constant y_true");
    return 1.0 - ss_res / ss_tot;
}

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || x.size() != y.size()) {
        throw DegenerateInput("pearson_r needs equal non-zero lengths");
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw DegenerateInput("pearson_r undefined for constant input");
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace judgeagg
