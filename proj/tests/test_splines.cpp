#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/splines.hpp"

using namespace judgeagg;

TEST_CASE("basis functions form a partition of unity on the range") {
    for (int m : {5, 7, 10}) {
        UniformBSplineBasis basis(0.3, 3.7, m);
        std::vector<double> values(static_cast<std::size_t>(m));
        for (int i = 0; i <= 200; ++i) {
            double x = 0.3 + (3.7 - 0.3) * i / 200.0;
            basis.evaluate(x, values);
            double sum = 0.0;
            int nonzero = 0;
            for (double v : values) {
                CHECK(v >= -1e-12);
                sum += v;
                if (v > 1e-12) ++nonzero;
            }
            CHECK(sum == Catch::Approx(1.0).epsilon(1e-10));
            CHECK(nonzero <= UniformBSplineBasis::kDegree + 1);
        }
    }
}

TEST_CASE("coefficients at the Greville sites reproduce the identity") {
    // Uniform knots put the Greville abscissae at lo + (i - 1) * step; with
    // those as coefficients the spline is exactly x, which is what lets the
    // second-difference penalty leave linear trends unpenalized.
    UniformBSplineBasis basis(1.0, 3.0, 8);
    std::vector<double> coefficients(8);
    for (int i = 0; i < 8; ++i) coefficients[i] = 1.0 + (i - 1) * basis.step();
    std::vector<double> values(8);
    for (int i = 0; i <= 100; ++i) {
        double x = 1.0 + 2.0 * i / 100.0;
        basis.evaluate(x, values);
        double s = 0.0;
        for (int k = 0; k < 8; ++k) s += coefficients[k] * values[k];
        CHECK(s == Catch::Approx(x).epsilon(1e-10));
    }
}

TEST_CASE("analytic derivative matches central differences") {
    UniformBSplineBasis basis(0.0, 4.0, 9);
    std::vector<double> d(9);
    std::vector<double> plus(9);
    std::vector<double> minus(9);
    const double h = 1e-6;
    for (int i = 1; i < 100; ++i) {
        double x = 4.0 * i / 100.0;
        basis.evaluate_derivative(x, d);
        basis.evaluate(x + h, plus);
        basis.evaluate(x - h, minus);
        for (int k = 0; k < 9; ++k) {
            double fd = (plus[k] - minus[k]) / (2.0 * h);
            CHECK(d[k] == Catch::Approx(fd).margin(1e-5));
        }
    }
}

TEST_CASE("evaluation clamps x into the range") {
    UniformBSplineBasis basis(0.0, 4.0, 6);
    std::vector<double> at_edge(6);
    std::vector<double> outside(6);
    basis.evaluate(4.0, at_edge);
    basis.evaluate(7.5, outside);
    CHECK(at_edge == outside);
    basis.evaluate(0.0, at_edge);
    basis.evaluate(-3.0, outside);
    CHECK(at_edge == outside);
}

TEST_CASE("basis construction rejects degenerate setups") {
    CHECK_THROWS_AS(UniformBSplineBasis(0.0, 1.0, 4), DegenerateInput);
    CHECK_THROWS_AS(UniformBSplineBasis(1.0, 1.0, 6), DegenerateInput);
    CHECK_THROWS_AS(UniformBSplineBasis(2.0, 1.0, 6), DegenerateInput);
}

TEST_CASE("second difference penalty matches the small-case matrix") {
    // m = 4: D = [[1,-2,1,0],[0,1,-2,1]], P = D'D.
    Eigen::MatrixXd p = second_difference_penalty(4);
    Eigen::MatrixXd expected(4, 4);
    expected << 1, -2, 1, 0,
               -2, 5, -4, 1,
                1, -4, 5, -2,
                0, 1, -2, 1;
    CHECK((p - expected).cwiseAbs().maxCoeff() == 0.0);

    // The penalty's null space contains constant and linear-in-index
    // coefficient sequences and nothing else.
    Eigen::MatrixXd p8 = second_difference_penalty(8);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
    Eigen::VectorXd ramp(8);
    for (int i = 0; i < 8; ++i) ramp[i] = i;
    CHECK((p8 * ones).norm() == Catch::Approx(0.0).margin(1e-12));
    CHECK((p8 * ramp).norm() == Catch::Approx(0.0).margin(1e-12));
    Eigen::VectorXd quad(8);
    for (int i = 0; i < 8; ++i) quad[i] = i * i;
    CHECK((p8 * quad).norm() > 1.0);
}
