#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jenseff/errors.hpp"
#include "jenseff/jensen.hpp"
#include "jenseff/linalg.hpp"
#include "jenseff/rng.hpp"
#include "jenseff/simgen.hpp"

#include <cmath>

using namespace jenseff;

TEST_CASE("t1 weights annihilate constants and linears") {
    const SimData data = gen_sim_data(60, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 1);
    const BasisSystem basis = t1_study_basis(data.E);
    for (const double lambda : {1e-6, 1e-2, 1e2}) {
        const RowVector u = delta_weights_t1(data.E, basis, lambda);
        CHECK(std::abs(u.sum()) < 1e-10);  // u . 1 = 0
        // linear responses have zero plug-in effect at every lambda
        const Vector y_lin = 2.0 * data.E.array() - 1.0;
        CHECK(std::abs(u.dot(y_lin)) < 1e-10);
    }
}

TEST_CASE("t1 weights match the explicitly assembled small-instance oracle") {
    const Vector E = (Vector(6) << 0.05, 0.2, 0.35, 0.55, 0.8, 0.95).finished();
    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, 4, 3);
    const double lambda = 0.37;

    Vector aug(7);
    aug.head(6) = E;
    aug[6] = E.mean();
    const Matrix phi = eval_basis(basis, E, 0);
    const Matrix phi_aug = eval_basis(basis, aug, 0);
    const Matrix pen = penalty_matrix(basis, 2);
    Vector a = Vector::Constant(7, 1.0 / 6.0);
    a[6] = -1.0;
    const Matrix m = phi.transpose() * phi + lambda * pen;
    const RowVector oracle =
        (a.transpose() * phi_aug) * m.ldlt().solve(Matrix(phi.transpose()));

    const RowVector u = delta_weights_t1(E, basis, lambda);
    CHECK((u - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("null correlation structure") {
    Rng rng(3);
    Matrix u(4, 30);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 30; ++j) u(i, j) = rng.normal();
    u.row(2) = u.row(1);  // duplicated smoothing parameter

    const Matrix a = null_correlation(u);
    CHECK(a.rows() == 4);
    for (Index i = 0; i < 4; ++i) CHECK(a(i, i) == 1.0);
    CHECK(a(1, 2) == doctest::Approx(1.0).epsilon(1e-12));
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) CHECK(std::abs(a(i, j)) <= 1.0 + 1e-12);

    CHECK(null_correlation(Matrix::Ones(1, 5)).rows() == 1);
    CHECK(null_correlation(Matrix::Ones(1, 5))(0, 0) == 1.0);

    Matrix with_zero = u;
    with_zero.row(3).setZero();
    CHECK_THROWS_AS(null_correlation(with_zero), DegenerateFunctionalError);
}

TEST_CASE("simulated critical values match closed-form quantiles") {
    // m = 1: two-sided normal quantile 1.9600
    const Matrix one = Matrix::Ones(1, 1);
    const double crit1 = simulate_max_null(one, 5000, 0.05, 42);
    CHECK(crit1 >= 1.90);
    CHECK(crit1 <= 2.02);

    // independent pair: 1 - sqrt(0.95) per-coordinate tail, quantile 2.2365
    const double crit2 = simulate_max_null(Matrix::Identity(2, 2), 5000, 0.05, 42);
    CHECK(crit2 >= 2.18);
    CHECK(crit2 <= 2.30);

    // perfectly correlated coordinates collapse to the m = 1 case
    const double crit_ones = simulate_max_null(Matrix::Ones(3, 3), 5000, 0.05, 7);
    CHECK(std::abs(crit_ones - crit1) < 0.08);
    CHECK(crit_ones <= crit2 + 0.02);  // crit shrinks as correlation grows

    CHECK(simulate_max_null(one, 5000, 0.05, 42) == crit1);  // deterministic
    CHECK_THROWS_AS(simulate_max_null(one, 100, 0.05, 1), std::invalid_argument);
    Matrix indefinite = Matrix::Identity(2, 2);
    indefinite(0, 1) = indefinite(1, 0) = 1.5;
    CHECK_THROWS_AS(simulate_max_null(indefinite, 5000, 0.05, 1), InvalidCorrelationError);
}

TEST_CASE("known-index test on a constant response never rejects") {
    const SimData data = gen_sim_data(50, LinkSpec{LinkName::linear, 0.0}, 0.1, 2);
    const Vector y_const = Vector::Constant(50, 3.7);
    const BasisSystem basis = t1_study_basis(data.E);
    const JensenSurface s =
        jensen_test_t1(data.E, y_const, basis, log10_grid(-6.0, 2.0, 9), 0.05, 5000, 11);
    CHECK(!s.reject);
    CHECK(s.delta.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.T_obs == 0.0);
}

TEST_CASE("known-index surface is linear in the response") {
    const SimData data = gen_sim_data(40, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 3);
    const BasisSystem basis = t1_study_basis(data.E);
    const Vector grid = log10_grid(-4.0, 2.0, 7);

    Rng rng(5);
    Vector y1(40), y2(40);
    for (int i = 0; i < 40; ++i) {
        y1[i] = rng.normal();
        y2[i] = rng.normal();
    }
    const JensenSurface s1 = jensen_test_t1(data.E, y1, basis, grid, 0.05, 5000, 1);
    const JensenSurface s2 = jensen_test_t1(data.E, y2, basis, grid, 0.05, 5000, 1);
    const JensenSurface mix =
        jensen_test_t1(data.E, Vector(2.0 * y1 - 0.5 * y2), basis, grid, 0.05, 5000, 1);
    const JensenSurface shifted =
        jensen_test_t1(data.E, Vector(y1.array() + 4.2), basis, grid, 0.05, 5000, 1);
    for (Index i = 0; i < grid.size(); ++i) {
        CHECK(mix.delta[i] == doctest::Approx(2.0 * s1.delta[i] - 0.5 * s2.delta[i])
                                  .epsilon(1e-10)
                                  .scale(1.0));
        CHECK(shifted.delta[i] == doctest::Approx(s1.delta[i]).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("decision is invariant under positive response scaling") {
    const SimData data = gen_sim_data(80, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 4);
    const BasisSystem basis = t1_study_basis(data.E);
    const Vector grid = log10_grid(-6.0, 2.0, 9);
    const JensenSurface s1 = jensen_test_t1(data.E, data.Y, basis, grid, 0.05, 5000, 9);
    const JensenSurface s2 =
        jensen_test_t1(data.E, Vector(3.0 * data.Y), basis, grid, 0.05, 5000, 9);
    CHECK(s1.reject == s2.reject);
    CHECK(s2.T_obs == doctest::Approx(s1.T_obs).epsilon(1e-8));
    for (Index i = 0; i < grid.size(); ++i)
        CHECK(s2.t[i] == doctest::Approx(s1.t[i]).epsilon(1e-8));
}

TEST_CASE("known-index test detects convexity on one instance") {
    const SimData data = gen_sim_data(100, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 1);
    const BasisSystem basis = t1_study_basis(data.E);
    const JensenSurface s =
        jensen_test_t1(data.E, data.Y, basis, default_t1_lambda_grid(), 0.05, 5000, 1);
    CHECK(s.reject);
    CHECK(s.delta[s.gcv_cell] > 0.0);  // convexity detected where GCV fits
    CHECK(s.A.rows() == 41);
    // correlation matrix is PSD up to tolerance
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.A);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("fsim delta is zero for a forced-linear link and positive under convexity") {
    const FsimSimData data = gen_fsim_data(100, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 1);
    const FsimBases bases = fsim_study_bases(data.ds);

    const FsimFit linear_fit = fit_fsim(data.ds, bases, 1e12, 1e-1);
    const DeltaSd lin = delta_hat_fsim(linear_fit);
    const double y_range = data.ds.Y.maxCoeff() - data.ds.Y.minCoeff();
    CHECK(std::abs(lin.delta) < 1e-6 * y_range);

    const FsimFit convex_fit = fit_fsim(data.ds, bases, 1e-4, 1e-2);
    const DeltaSd cvx = delta_hat_fsim(convex_fit);
    CHECK(cvx.delta > 0.0);
    CHECK(cvx.sd > 0.0);
}

TEST_CASE("fsim delta is invariant under a response shift") {
    const FsimSimData data = gen_fsim_data(100, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 1);
    const FsimBases bases = fsim_study_bases(data.ds);
    FitOptions tight;
    tight.rel_obj_tol = 0.0;

    const FsimFit fit0 = fit_fsim(data.ds, bases, 1e-3, 1e-2, std::nullopt, tight);
    FsimDataset shifted = data.ds;
    shifted.Y.array() += 3.0;
    const FsimFit fit3 = fit_fsim(shifted, bases, 1e-3, 1e-2, std::nullopt, tight);

    const double d0 = delta_hat_fsim(fit0).delta;
    const double d3 = delta_hat_fsim(fit3).delta;
    CHECK(std::abs(d0 - d3) < 1e-8 * std::max(1.0, std::abs(d0)));
}

TEST_CASE("single-cell fsim surface reduces to a z-test") {
    const FsimSimData data = gen_fsim_data(60, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 2);
    const FsimBases bases = fsim_study_bases(data.ds);
    const Vector lg = Vector::Constant(1, 1e-3);
    const Vector lb = Vector::Constant(1, 1e-1);
    const JensenSurface s = jensen_test_fsim(data.ds, bases, lg, lb, 0.05, 5000, 21);
    CHECK(s.grid.size() == 1);
    CHECK(s.crit >= 1.90);
    CHECK(s.crit <= 2.02);
    CHECK(s.T_obs == doctest::Approx(std::abs(s.t[0])));
    CHECK(s.reject == (std::abs(s.t[0]) > s.crit));
    CHECK(s.t[0] == doctest::Approx(s.delta[0] / s.sd[0]).epsilon(1e-12));
}

TEST_CASE("top lambda_g row of the fsim surface has negligible t on linear data") {
    const FsimSimData data = gen_fsim_data(60, LinkSpec{LinkName::linear, 0.0}, 0.0, 5);
    const FsimBases bases = fsim_study_bases(data.ds);
    const Vector lg = log10_grid(-2.0, 2.0, 3);
    const Vector lb = log10_grid(-8.0, -7.0, 2);
    // noiseless data needs fits polished to stationarity so the residual
    // scale lands below the degeneracy threshold instead of at the optimizer
    // noise floor, where t would be a ratio of optimization errors
    FitOptions tight;
    tight.rel_obj_tol = 0.0;
    const JensenSurface s = jensen_test_fsim(data.ds, bases, lg, lb, 0.05, 5000, 31, tight);
    // sigma degenerates on noiseless data: every t is reported as zero
    for (std::size_t cell = (3 - 1) * 2; cell < 6; ++cell) {
        REQUIRE(s.valid[cell]);
        CHECK(std::abs(s.t[static_cast<Index>(cell)]) < 0.1);
    }
    CHECK(!s.reject);
}

TEST_CASE("fsim surface bookkeeping on a 2x2 grid") {
    const FsimSimData data = gen_fsim_data(80, LinkSpec{LinkName::exp_pos, 0.0}, 0.1, 3);
    const FsimBases bases = fsim_study_bases(data.ds);
    const Vector lg = log10_grid(-4.0, -1.0, 2);
    const Vector lb = log10_grid(-2.0, 1.0, 2);
    const JensenSurface s = jensen_test_fsim(data.ds, bases, lg, lb, 0.05, 5000, 17);

    CHECK(s.grid.size() == 4);
    CHECK(s.n_lambda_g == 2);
    CHECK(s.n_lambda_beta == 2);
    // row-major flattening: cell 1 holds (lg[0], lb[1])
    CHECK(s.grid[1].lambda_g == lg[0]);
    CHECK(s.grid[1].lambda_beta == lb[1]);
    CHECK(s.sigma_used.sigma > 0.0);
    CHECK(s.gcv_cell >= 0);

    int n_valid = 0;
    for (const char v : s.valid) n_valid += v ? 1 : 0;
    CHECK(s.A.rows() == n_valid);
    for (Index i = 0; i < s.A.rows(); ++i) CHECK(s.A(i, i) == 1.0);

    // t = delta / sd cellwise
    for (std::size_t cell = 0; cell < 4; ++cell) {
        if (!s.valid[cell]) continue;
        const auto i = static_cast<Index>(cell);
        CHECK(s.t[i] == doctest::Approx(s.delta[i] / s.sd[i]).epsilon(1e-12));
    }
}

TEST_CASE("sign summary reports mixed when the effect changes sign over the grid") {
    const FsimSimData data = gen_fsim_data(100, LinkSpec{LinkName::linear, 0.0}, 0.1, 1);
    const FsimBases bases = fsim_study_bases(data.ds);
    const JensenSurface s =
        jensen_test_fsim(data.ds, bases, default_fsim_lambda_g_grid(),
                         default_fsim_lambda_beta_grid(), 0.05, 5000, 1);
    bool has_pos = false, has_neg = false;
    for (std::size_t c = 0; c < s.grid.size(); ++c) {
        if (!s.valid[c]) continue;
        has_pos = has_pos || s.delta[static_cast<Index>(c)] > 0.0;
        has_neg = has_neg || s.delta[static_cast<Index>(c)] < 0.0;
    }
    REQUIRE(has_pos);
    REQUIRE(has_neg);
    CHECK(s.sign_summary == SignSummary::mixed);
}
