#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "judgeagg/errors.hpp"

namespace judgeagg {

/// Cubic B-spline basis on equally spaced knots extending past both ends of
/// [lo, hi]. Uniform (unclamped) knots keep the Greville sites equispaced, so
/// coefficient sequences that are linear in index reproduce functions that
/// are linear in x; together with the second-order difference penalty this
/// makes the penalty null space exactly the linear functions.
class UniformBSplineBasis {
public:
    static constexpr int kDegree = 3;

    UniformBSplineBasis() = default;

    UniformBSplineBasis(double lo, double hi, int num_basis)
        : lo_(lo), hi_(hi), num_basis_(num_basis) {
        if (num_basis < kDegree + 2) {
            throw DegenerateInput("B-spline basis needs at least " +
                                  std::to_string(kDegree + 2) + " functions");
        }
        if (!(hi > lo)) throw DegenerateInput("B-spline range must be non-degenerate");
        step_ = (hi - lo) / static_cast<double>(num_basis - kDegree);
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    int num_basis() const { return num_basis_; }
    double step() const { return step_; }

    // Knot i of the num_basis + kDegree + 1 knots.
    double knot(int i) const { return lo_ + (i - kDegree) * step_; }

    /// Writes the num_basis basis values at x (clamped into [lo, hi]) into
    /// `values`; only kDegree + 1 entries are nonzero.
    void evaluate(double x, std::span<double> values) const { eval_impl(x, values, false); }

    /// Same layout, first derivatives.
    void evaluate_derivative(double x, std::span<double> values) const {
        eval_impl(x, values, true);
    }

private:
    void eval_impl(double x, std::span<double> values, bool derivative) const {
        std::fill(values.begin(), values.end(), 0.0);
        x = std::clamp(x, lo_, hi_);
        int span = kDegree + static_cast<int>((x - lo_) / step_);
        span = std::min(span, num_basis_ - 1);

        // Basis values of the active degree-d functions via the de Boor
        // triangle; N[r] holds B_{span-d+r,d}(x) after the loop.
        auto triangle = [&](int degree, double* n_out) {
            double left[kDegree + 1];
            double right[kDegree + 1];
            n_out[0] = 1.0;
            for (int j = 1; j <= degree; ++j) {
                left[j] = x - knot(span + 1 - j);
                right[j] = knot(span + j) - x;
                double saved = 0.0;
                for (int r = 0; r < j; ++r) {
                    double temp = n_out[r] / (right[r + 1] + left[j - r]);
                    n_out[r] = saved + right[r + 1] * temp;
                    saved = left[j - r] * temp;
                }
                n_out[j] = saved;
            }
        };

        if (!derivative) {
            double n[kDegree + 1];
            triangle(kDegree, n);
            for (int r = 0; r <= kDegree; ++r) values[span - kDegree + r] = n[r];
            return;
        }
        // d/dx B_{i,3} = (B_{i,2} - B_{i+1,2}) / step for uniform knots.
        double n2[kDegree];
        triangle(kDegree - 1, n2);
        auto lower = [&](int i) {  // B_{i,2}(x); nonzero for i in [span-2, span]
            int r = i - (span - kDegree + 1);
            return (r >= 0 && r < kDegree) ? n2[r] : 0.0;
        };
        for (int i = span - kDegree; i <= span; ++i) {
            values[i] = (lower(i) - lower(i + 1)) / step_;
        }
    }

    double lo_ = 0.0;
    double hi_ = 1.0;
    int num_basis_ = kDegree + 2;
    double step_ = 1.0;
};

/// P = D2' D2 where D2 is the (m-2) x m second-difference matrix.
inline Eigen::MatrixXd second_difference_penalty(int m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m - 2, m);
    for (int r = 0; r < m - 2; ++r) {
        d(r, r) = 1.0;
        d(r, r + 1) = -2.0;
        d(r, r + 2) = 1.0;
    }
    return d.transpose() * d;
}

}  // namespace judgeagg
