#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jenseff/errors.hpp"
#include "jenseff/rng.hpp"
#include "jenseff/smoothing.hpp"

#include <cmath>

using namespace jenseff;

namespace {

Vector linspace(double lo, double hi, int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

struct OlsLine {
    double intercept;
    double slope;
};

OlsLine ols(const Vector& x, const Vector& y) {
    const double xbar = x.mean(), ybar = y.mean();
    const double sxx = (x.array() - xbar).square().sum();
    const double slope = (x.array() - xbar).matrix().dot(y) / sxx;
    return {ybar - slope * xbar, slope};
}

}  // namespace

TEST_CASE("linear data is reproduced exactly at any lambda") {
    const Vector x = linspace(0.0, 1.0, 40);
    const Vector y = 2.0 * x.array() - 0.5;
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 10, 4);
    for (const double lambda : {0.0, 1.0, 1e6}) {
        const SmoothFit fit = fit_smooth(x, y, basis, lambda);
        CHECK((fitted_values(fit) - y).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("huge lambda collapses to the least-squares line") {
    Rng rng(42);
    const Vector x = linspace(0.0, 1.0, 60);
    Vector y(60);
    for (int i = 0; i < 60; ++i) y[i] = std::sin(3.0 * x[i]) + 0.2 * rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 12, 4);
    const SmoothFit fit = fit_smooth(x, y, basis, 1e12);
    const OlsLine line = ols(x, y);
    const Vector fitted = fitted_values(fit);
    for (int i = 0; i < 60; ++i) {
        const double want = line.intercept + line.slope * x[i];
        CHECK(std::abs(fitted[i] - want) < 1e-4 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("square full-rank design interpolates at lambda 0") {
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 8, 4);
    const Vector x = linspace(0.02, 0.98, 8);
    Rng rng(5);
    Vector y(8);
    for (int i = 0; i < 8; ++i) y[i] = rng.normal();
    const SmoothFit fit = fit_smooth(x, y, basis, 0.0);
    CHECK((fitted_values(fit) - y).cwiseAbs().maxCoeff() < 1e-6);

    const Matrix s = smoother_matrix(fit);
    CHECK((s - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("stored fit satisfies the normal equations") {
    Rng rng(9);
    const Vector x = linspace(0.0, 2.0, 50);
    Vector y(50);
    for (int i = 0; i < 50; ++i) y[i] = std::cos(2.0 * x[i]) + 0.1 * rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 2.0}, 11, 4);
    const SmoothFit fit = fit_smooth(x, y, basis, 0.37);

    const Matrix phi = eval_basis(basis, x, 0);
    const Matrix m = phi.transpose() * phi + fit.lambda * penalty_matrix(basis, 2);
    const Vector rhs = phi.transpose() * y;
    CHECK((m * fit.coef - rhs).norm() < 1e-8 * rhs.norm());
    CHECK(fit.hat_trace > 0.0);
    CHECK(fit.hat_trace <= std::min<double>(50, basis.n_basis) + 1e-9);
}

TEST_CASE("smoother matrix reproduces constants and shrinks with lambda") {
    Rng rng(12);
    const Vector x = linspace(0.0, 1.0, 45);
    Vector y(45);
    for (int i = 0; i < 45; ++i) y[i] = rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 12, 4);

    double prev_trace = 1e300;
    for (const double lambda : log10_grid(-8.0, 4.0, 13)) {
        const SmoothFit fit = fit_smooth(x, y, basis, lambda);
        const Matrix s = smoother_matrix(fit);
        CHECK((s * Vector::Ones(45) - Vector::Ones(45)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(fit.hat_trace <= prev_trace + 1e-10);
        prev_trace = fit.hat_trace;
        // stored traces agree with the materialized matrix
        CHECK(fit.hat_trace == doctest::Approx(s.trace()).epsilon(1e-8));
        CHECK(fit.hat_trace2 ==
              doctest::Approx((s.array() * s.transpose().array()).sum()).epsilon(1e-8));
    }
}

TEST_CASE("gcv definition and degeneracy") {
    const Vector x = linspace(0.0, 1.0, 30);
    const Vector y = x;
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 10, 4);
    const SmoothFit fit = fit_smooth(x, y, basis, 1.0);
    CHECK(gcv(fit) == doctest::Approx(0.0).epsilon(1e-12));  // zero residuals

    // square interpolating smoother: tr(S) = n, gcv denominator collapses
    const BasisSystem square = make_bspline_basis({0.0, 1.0}, 8, 4);
    const SmoothFit interp = fit_smooth(linspace(0.02, 0.98, 8), Vector::Ones(8), square, 0.0);
    CHECK_THROWS_AS(gcv(interp), DegenerateSmootherError);
}

TEST_CASE("gcv minimizer is interior for pure noise") {
    Rng rng(2001);
    const Vector x = linspace(0.0, 1.0, 80);
    Vector y(80);
    for (int i = 0; i < 80; ++i) y[i] = rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 15, 4);
    const Vector grid = log10_grid(-8.0, 4.0, 25);
    const LambdaSelection sel = select_lambda_gcv(x, y, basis, grid);
    CHECK(sel.lambda > grid[0]);
    CHECK(sel.lambda < grid[24]);
}

TEST_CASE("sigma hat recovers the noise scale") {
    // linear truth + N(0, 0.1^2), n = 200: sigma in [0.08, 0.12] in >= 90% of 100 replicates
    const Vector x = linspace(0.0, 1.0, 200);
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 15, 4);
    const Vector grid = log10_grid(-8.0, 4.0, 21);
    int in_band = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(1000 + rep);
        Vector y(200);
        for (int i = 0; i < 200; ++i) y[i] = 1.5 * x[i] - 0.2 + 0.1 * rng.normal();
        const LambdaSelection sel = select_lambda_gcv(x, y, basis, grid);
        const double s = sigma_hat(sel.fit);
        if (s >= 0.08 && s <= 0.12) ++in_band;
    }
    CHECK(in_band >= 90);
}

TEST_CASE("df_res matches the materialized smoother") {
    Rng rng(77);
    const Vector x = linspace(0.0, 1.0, 40);
    Vector y(40);
    for (int i = 0; i < 40; ++i) y[i] = std::sin(5 * x[i]) + 0.3 * rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 12, 4);
    const SmoothFit fit = fit_smooth(x, y, basis, 0.01);
    const Matrix s = smoother_matrix(fit);
    const double df_direct =
        40.0 - 2.0 * s.trace() + (s * s.transpose()).trace();
    const double df_stored = 40.0 - 2.0 * fit.hat_trace + fit.hat_trace2;
    CHECK(df_stored == doctest::Approx(df_direct).epsilon(1e-8));
    CHECK(sigma_hat(fit) == doctest::Approx(std::sqrt(fit.rss / df_direct)).epsilon(1e-8));
}

TEST_CASE("lambda selection semantics") {
    const Vector x = linspace(0.0, 1.0, 50);
    Rng rng(31);
    Vector y(50);
    for (int i = 0; i < 50; ++i) y[i] = x[i] * x[i] + 0.01 * rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 12, 4);

    // one-point grid returns that lambda
    const Vector one = Vector::Constant(1, 0.123);
    CHECK(select_lambda_gcv(x, y, basis, one).lambda == 0.123);

    // quadratic truth at low noise selects below the top decade
    const Vector grid = log10_grid(-8.0, 4.0, 25);
    const LambdaSelection sel = select_lambda_gcv(x, y, basis, grid);
    CHECK(sel.lambda < 1e3);

    // selection is a function of the set, not the order
    Vector shuffled(25);
    for (int i = 0; i < 25; ++i) shuffled[i] = grid[(i * 7) % 25];
    CHECK(select_lambda_gcv(x, y, basis, shuffled).lambda == sel.lambda);
}

TEST_CASE("linearity and shift properties of the smoother") {
    Rng rng(8);
    const Vector x = linspace(0.0, 1.0, 35);
    Vector y1(35), y2(35);
    for (int i = 0; i < 35; ++i) {
        y1[i] = rng.normal();
        y2[i] = rng.normal();
    }
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 10, 4);
    const double lambda = 0.05;

    const Vector mix = 1.7 * y1 - 0.4 * y2;
    const Vector coef_mix = fit_smooth(x, mix, basis, lambda).coef;
    const Vector coef_lin = 1.7 * fit_smooth(x, y1, basis, lambda).coef -
                            0.4 * fit_smooth(x, y2, basis, lambda).coef;
    CHECK((coef_mix - coef_lin).cwiseAbs().maxCoeff() < 1e-10);

    const Vector shifted = y1.array() + 3.25;
    const Vector f0 = fitted_values(fit_smooth(x, y1, basis, lambda));
    const Vector f1 = fitted_values(fit_smooth(x, shifted, basis, lambda));
    CHECK((f1 - f0 - Vector::Constant(35, 3.25)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gcv scale invariance of the selection") {
    Rng rng(13);
    const Vector x = linspace(0.0, 1.0, 60);
    Vector y(60);
    for (int i = 0; i < 60; ++i) y[i] = std::sin(4 * x[i]) + 0.2 * rng.normal();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 12, 4);
    const Vector grid = log10_grid(-6.0, 3.0, 15);

    const LambdaSelection a = select_lambda_gcv(x, y, basis, grid);
    const LambdaSelection b = select_lambda_gcv(x, Vector(2.5 * y), basis, grid);
    CHECK(a.lambda == b.lambda);
    CHECK(gcv(b.fit) == doctest::Approx(2.5 * 2.5 * gcv(a.fit)).epsilon(1e-9));
}
