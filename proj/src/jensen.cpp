#include "jenseff/jensen.hpp"
#include "jenseff/errors.hpp"
#include "jenseff/linalg.hpp"
#include "jenseff/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace jenseff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Residual scale below which t-inference is meaningless (interpolating fit):
// every t is reported as 0 and the test cannot reject.
bool sigma_degenerate(double sigma, double y_scale) {
    return !(sigma > 1e-5 * y_scale);
}

// Weight vectors below this norm are float residue of an exactly-zero
// functional (useful cells sit many orders above; see the huge-lambda limit).
constexpr double kVoidWeightNorm = 1e-10;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1));
}

SignSummary summarize_sign(const Vector& delta, const std::vector<char>& valid) {
    int pos = 0, neg = 0;
    for (Index i = 0; i < delta.size(); ++i) {
        if (!valid[static_cast<std::size_t>(i)]) continue;
        if (delta[i] > 0.0) ++pos;
        if (delta[i] < 0.0) ++neg;
    }
    if (pos > 0 && neg == 0) return SignSummary::all_positive;
    if (neg > 0 && pos == 0) return SignSummary::all_negative;
    return SignSummary::mixed;
}

void fill_extrema(JensenSurface& s) {
    s.argmax_delta_cell = s.argmin_delta_cell = -1;
    for (Index i = 0; i < s.delta.size(); ++i) {
        if (!s.valid[static_cast<std::size_t>(i)]) continue;
        if (s.argmax_delta_cell < 0 || s.delta[i] > s.delta[s.argmax_delta_cell])
            s.argmax_delta_cell = static_cast<int>(i);
        if (s.argmin_delta_cell < 0 || s.delta[i] < s.delta[s.argmin_delta_cell])
            s.argmin_delta_cell = static_cast<int>(i);
    }
}

}  // namespace

std::string to_string(SignSummary s) {
    switch (s) {
        case SignSummary::all_positive: return "all-positive";
        case SignSummary::all_negative: return "all-negative";
        default: return "mixed";
    }
}

namespace {

// Shared machinery for the known-index weights. Pivoted LDLT per lambda
// keeps u accurate even when the design Gram is singular (basis functions at
// the index extremes can sit on a single observation).
struct T1System {
    Matrix phi;   // n x K
    Matrix gram;  // K x K
    Matrix pen;
    Vector lead;  // Phi+' a

    explicit T1System(const Vector& E, const BasisSystem& basis) {
        const Index n = E.size();
        if (n < 2) throw std::invalid_argument("delta_weights_t1: need at least 2 points");
        Vector aug(n + 1);
        aug.head(n) = E;
        aug[n] = E.mean();
        phi = eval_basis(basis, E, 0);
        const Matrix phi_aug = eval_basis(basis, aug, 0);
        gram = phi.transpose() * phi;
        pen = penalty_matrix(basis, 2);
        Vector a = Vector::Constant(n + 1, 1.0 / static_cast<double>(n));
        a[n] = -1.0;
        lead = phi_aug.transpose() * a;
    }

    RowVector weights(double lambda) const {
        Eigen::LDLT<Matrix> ldlt(gram + lambda * pen);
        if (ldlt.info() != Eigen::Success)
            throw IllConditionedError("delta_weights_t1: penalized system factorization failed");
        return (phi * ldlt.solve(lead)).transpose();
    }
};

}  // namespace

RowVector delta_weights_t1(const Vector& E, const BasisSystem& basis, double lambda) {
    if (!(lambda >= 0.0))
        throw std::invalid_argument("delta_weights_t1: lambda must be nonnegative");
    return T1System(E, basis).weights(lambda);
}

Matrix null_correlation(const Matrix& U) {
    const Index m = U.rows();
    if (m == 0) throw std::invalid_argument("null_correlation: no rows");
    Vector norms(m);
    for (Index i = 0; i < m; ++i) {
        norms[i] = U.row(i).norm();
        if (!(norms[i] > 0.0))
            throw DegenerateFunctionalError("null_correlation: zero-norm weight vector");
    }
    Matrix a = U * U.transpose();
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) a(i, j) /= norms[i] * norms[j];
    a = 0.5 * (a + a.transpose()).eval();
    a.diagonal().setOnes();
    return a;
}

double simulate_max_null(const Matrix& A, int n_draws, double alpha, std::uint64_t seed) {
    const Index m = A.rows();
    if (m == 0 || A.cols() != m)
        throw std::invalid_argument("simulate_max_null: A must be square and nonempty");
    if (n_draws < 1000)
        throw std::invalid_argument("simulate_max_null: need at least 1000 draws");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("simulate_max_null: alpha must be in (0, 1)");

    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (A + A.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw InvalidCorrelationError("simulate_max_null: correlation matrix not PSD");
    Vector sqrt_ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix root = es.eigenvectors() * sqrt_ev.asDiagonal();

    Rng rng(seed);
    std::vector<double> maxima(static_cast<std::size_t>(n_draws));
    Vector z(m);
    for (int d = 0; d < n_draws; ++d) {
        for (Index j = 0; j < m; ++j) z[j] = rng.normal();
        maxima[static_cast<std::size_t>(d)] = (root * z).cwiseAbs().maxCoeff();
    }
    std::sort(maxima.begin(), maxima.end());
    // smallest value with empirical cdf >= 1 - alpha
    const auto idx = static_cast<std::size_t>(
        std::clamp<long>(static_cast<long>(std::ceil((1.0 - alpha) * n_draws)) - 1, 0L,
                         static_cast<long>(n_draws) - 1));
    return maxima[idx];
}

JensenSurface jensen_test_t1(const Vector& E, const Vector& Y, const BasisSystem& basis,
                             const Vector& lambda_grid, double alpha, int n_draws,
                             std::uint64_t seed) {
    if (lambda_grid.size() == 0)
        throw std::invalid_argument("jensen_test_t1: empty lambda grid");
    if (E.size() != Y.size())
        throw std::invalid_argument("jensen_test_t1: E and Y lengths differ");

    const Index m = lambda_grid.size();
    const Index n = E.size();

    JensenSurface s;
    s.n_lambda_g = static_cast<int>(m);
    s.n_lambda_beta = 0;
    s.alpha = alpha;
    s.n_null_draws = n_draws;
    s.seed = seed;
    s.grid.resize(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) s.grid[static_cast<std::size_t>(i)] = {lambda_grid[i], kNaN};
    s.valid.assign(static_cast<std::size_t>(m), 1);
    s.failures.assign(static_cast<std::size_t>(m), "");

    const T1System sys(E, basis);
    Matrix U(m, n);
    for (Index i = 0; i < m; ++i) {
        if (!(lambda_grid[i] >= 0.0))
            throw std::invalid_argument("jensen_test_t1: lambda must be nonnegative");
        U.row(i) = sys.weights(lambda_grid[i]);
    }

    s.delta = U * Y;

    const LambdaSelection sel = select_lambda_gcv(E, Y, basis, lambda_grid);
    const double sigma = sigma_hat(sel.fit);
    int gcv_idx = -1;
    for (Index i = 0; i < m; ++i)
        if (lambda_grid[i] == sel.lambda) gcv_idx = static_cast<int>(i);
    s.sigma_used = {sigma, sel.lambda, kNaN, gcv_idx};
    s.gcv_cell = gcv_idx;

    s.sd.resize(m);
    s.t.resize(m);
    const bool degenerate = sigma_degenerate(sigma, std::max(1.0, Y.cwiseAbs().maxCoeff()));
    std::size_t n_void = 0;
    for (Index i = 0; i < m; ++i) {
        const double unorm = U.row(i).norm();
        if (unorm < kVoidWeightNorm) {
            // the penalty has linearized the smoother completely: the effect
            // functional is exactly zero in real arithmetic and only roundoff
            // survives in floats
            s.valid[static_cast<std::size_t>(i)] = 0;
            s.failures[static_cast<std::size_t>(i)] = "effect functional annihilated by penalty";
            s.sd[i] = 0.0;
            s.t[i] = 0.0;
            ++n_void;
            continue;
        }
        s.sd[i] = degenerate ? 0.0 : sigma * unorm;
        s.t[i] = degenerate ? 0.0 : s.delta[i] / s.sd[i];
    }

    if (n_void < static_cast<std::size_t>(m)) {
        Matrix u_valid(m - static_cast<Index>(n_void), n);
        Index r = 0;
        for (Index i = 0; i < m; ++i)
            if (s.valid[static_cast<std::size_t>(i)]) u_valid.row(r++) = U.row(i);
        s.A = null_correlation(u_valid);
        s.crit = simulate_max_null(s.A, n_draws, alpha, derive_seed(seed, 0x6a31));
        s.T_obs = s.t.cwiseAbs().maxCoeff();
        s.reject = s.T_obs > s.crit;
    } else {
        // every cell is fully linearized: no effect is measurable anywhere
        s.crit = kNaN;
        s.T_obs = 0.0;
        s.reject = false;
    }
    s.sign_summary = summarize_sign(s.delta, s.valid);
    fill_extrema(s);
    return s;
}

DeltaSd delta_hat_fsim(const FsimFit& fit) {
    const Index n = fit.index.size();
    Vector aug(n + 1);
    for (Index i = 0; i < n; ++i)
        aug[i] = std::clamp(fit.index[i], -fit.s_range, fit.s_range);
    aug[n] = std::clamp(fit.index_bar, -fit.s_range, fit.s_range);

    const Matrix phi_aug = eval_basis(fit.g_basis, aug, 0);
    Vector a = Vector::Constant(n + 1, 1.0 / static_cast<double>(n));
    a[n] = -1.0;
    const Vector w = phi_aug.transpose() * a;  // K1

    const Matrix cov = coef_covariance(fit);
    const Index k1 = fit.d.size();
    const double var = w.dot(cov.topLeftCorner(k1, k1) * w);
    DeltaSd r;
    r.delta = w.dot(fit.d);
    if (!(var > 1e-28))
        throw DegenerateFunctionalError("delta_hat_fsim: degenerate standard error");
    r.sd = std::sqrt(var);
    return r;
}

JensenSurface jensen_test_from_grid(const FsimGrid& grid, double alpha, int n_draws,
                                    std::uint64_t seed) {
    const std::size_t m = grid.cells.size();
    if (m == 0) throw std::invalid_argument("jensen_test_from_grid: empty grid");

    JensenSurface s;
    s.grid = grid.cells;
    s.n_lambda_g = grid.n_lambda_g;
    s.n_lambda_beta = grid.n_lambda_beta;
    s.alpha = alpha;
    s.n_null_draws = n_draws;
    s.seed = seed;
    s.gcv_cell = grid.gcv_cell;
    s.delta = Vector::Constant(static_cast<Index>(m), kNaN);
    s.sd = Vector::Constant(static_cast<Index>(m), kNaN);
    s.t = Vector::Constant(static_cast<Index>(m), kNaN);
    s.valid.assign(m, 0);
    s.failures = grid.failures;

    // sigma-hat was pinned at the GCV cell by warm_start_grid
    const FsimFit* gcv_fit =
        grid.gcv_cell >= 0 ? &*grid.fits[static_cast<std::size_t>(grid.gcv_cell)] : nullptr;
    if (!gcv_fit) throw SurfaceInvalidError("jensen_test_from_grid: no GCV cell");
    s.sigma_used = {grid.sigma_gcv, gcv_fit->lambda_g, gcv_fit->lambda_beta, grid.gcv_cell};
    const bool degenerate = sigma_degenerate(grid.sigma_gcv, grid.y_scale);

    Matrix pg;  // shared across cells (same g basis)
    std::vector<RowVector> u_rows(m);
    Index n = 0;
    for (std::size_t cell = 0; cell < m; ++cell) {
        const auto& fit = grid.fits[cell];
        if (!fit) continue;
        if (fit->n_clamped > 0) {
            s.failures[cell] = "index clamped in final fit";
            continue;
        }
        if (pg.size() == 0) pg = penalty_matrix(fit->g_basis, 2);
        n = fit->index.size();
        try {
            const DeltaSd ds = delta_hat_fsim(*fit);
            // u from the cell's linearization: a' Phi(i) (Phi(i-1)'Phi(i-1) + lg Pg)^-1 Phi(i-1)'
            Vector sc(n), aug(n + 1);
            for (Index i = 0; i < n; ++i)
                sc[i] = std::clamp(fit->index[i], -fit->s_range, fit->s_range);
            aug.head(n) = sc;
            aug[n] = std::clamp(fit->index_bar, -fit->s_range, fit->s_range);
            const Matrix phi = eval_basis(fit->g_basis, sc, 0);
            const Matrix phi_aug = eval_basis(fit->g_basis, aug, 0);
            Vector a = Vector::Constant(n + 1, 1.0 / static_cast<double>(n));
            a[n] = -1.0;
            SpdSolver solver(Matrix(phi.transpose() * phi + fit->lambda_g * pg));
            const Vector z = solver.solve(Vector(phi_aug.transpose() * a));
            u_rows[cell] = (phi * z).transpose();
            if (u_rows[cell].norm() < kVoidWeightNorm) {
                s.failures[cell] = "effect functional annihilated by penalty";
                continue;
            }

            s.delta[static_cast<Index>(cell)] = ds.delta;
            s.sd[static_cast<Index>(cell)] = degenerate ? 0.0 : ds.sd;
            s.t[static_cast<Index>(cell)] = degenerate ? 0.0 : ds.delta / ds.sd;
            s.valid[cell] = 1;
        } catch (const std::exception& exc) {
            s.failures[cell] = exc.what();
        }
    }

    std::size_t n_valid = 0;
    for (const char v : s.valid) n_valid += v ? 1 : 0;
    if (static_cast<double>(m - n_valid) > 0.2 * static_cast<double>(m))
        throw SurfaceInvalidError("jensen_test_from_grid: more than 20% of cells failed");

    Matrix U(static_cast<Index>(n_valid), n);
    Index r = 0;
    for (std::size_t cell = 0; cell < m; ++cell)
        if (s.valid[cell]) U.row(r++) = u_rows[cell].row(0);

    s.A = null_correlation(U);
    s.crit = simulate_max_null(s.A, n_draws, alpha, derive_seed(seed, 0x6a32));
    s.T_obs = 0.0;
    for (std::size_t cell = 0; cell < m; ++cell)
        if (s.valid[cell])
            s.T_obs = std::max(s.T_obs, std::abs(s.t[static_cast<Index>(cell)]));
    s.reject = s.T_obs > s.crit;
    s.sign_summary = summarize_sign(s.delta, s.valid);
    fill_extrema(s);
    return s;
}

JensenSurface jensen_test_fsim(const FsimDataset& ds, const FsimBases& bases,
                               const Vector& lambda_g_grid, const Vector& lambda_beta_grid,
                               double alpha, int n_draws, std::uint64_t seed,
                               const FitOptions& opts) {
    const FsimGrid grid = warm_start_grid(ds, bases, lambda_g_grid, lambda_beta_grid, opts);
    return jensen_test_from_grid(grid, alpha, n_draws, seed);
}

}  // namespace jenseff
