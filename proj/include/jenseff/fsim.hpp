#pragma once

#include "jenseff/basis.hpp"
#include "jenseff/optim.hpp"
#include "jenseff/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jenseff {

/// n responses paired with n covariate curves sampled on a shared grid.
struct FsimDataset {
    Vector t_grid;  // increasing sample points
    Matrix X;       // n x len(t_grid)
    Vector Y;       // n
};

void validate_dataset(const FsimDataset& ds);

struct FsimBases {
    BasisSystem g;     // link basis, domain symmetric about 0: [-S, S]
    BasisSystem beta;  // coefficient-function basis on the curve domain
};

/// Fitted single index model: Y ~ g(integral X beta), g = phi'd, beta = psi'c,
/// with ||c|| = 1 and beta(a) >= 0.
struct FsimFit {
    Vector c;  // K2, unit norm, sign-fixed
    Vector d;  // K1
    double lambda_g = 0.0;
    double lambda_beta = 0.0;
    BasisSystem g_basis;
    BasisSystem beta_basis;
    Matrix Psi;          // n x K2 design of integrated basis effects
    Vector index;        // raw integrals (Psi c), unclamped
    double index_bar = 0.0;
    double s_range = 0.0;  // half-width of the g domain
    double sigma_hat = 0.0;
    double gcv_value = 0.0;
    double objective = 0.0;
    double rss = 0.0;
    bool converged = false;
    int n_restarts_used = 0;
    int n_clamped = 0;  // indices beyond [-S, S] in the returned fit (flagged, never hidden)
    int total_iterations = 0;
};

struct FitOptions {
    double rel_obj_tol = 1e-10;
    double grad_tol = 1e-8;
    int max_iterations = 2000;
    // neighbor-seeded refinement passes in warm_start_grid; 0 fits each cell
    // from the linear initialization only (the simulation-study procedure)
    int max_warm_sweeps = 10;
};

/// Psi[i][j] = trapezoid integral of X_i * psi_j over the sample grid.
Matrix functional_design(const FsimDataset& ds, const BasisSystem& beta_basis);

/// Half-width for the g domain: the largest leading-PC score of the curves,
/// widened by the largest curve L2 norm so |integral X_i beta| <= S holds for
/// every unit-norm beta in an orthonormal basis.
struct IndexRange {
    double value = 0.0;
    double pca_score = 0.0;
    double max_curve_norm = 0.0;
    bool curve_norm_active = false;  // which bound produced `value`
};
IndexRange index_range(const FsimDataset& ds);

struct ClampResult {
    double value = 0.0;
    double excess = 0.0;
};
ClampResult index_clamp(double s, double S);

/// Penalized least squares: RSS + lambda_g d'Pg d + lambda_beta c'Pb c plus
/// the index-exceedance penalty; c enters through its normalization c/||c||,
/// keeping the objective continuous (the sign convention is applied to
/// returned fits through the reflection symmetry instead).
double pls_objective(const Vector& c, const Vector& d, const FsimDataset& ds,
                     const FsimBases& bases, double lambda_g, double lambda_beta);

/// Analytic gradient of pls_objective, stacked as (d, c).
Vector pls_gradient(const Vector& c, const Vector& d, const FsimDataset& ds,
                    const FsimBases& bases, double lambda_g, double lambda_beta);

struct InitPair {
    Vector c0;
    Vector d0;
};

/// d0 makes g exactly linear (OLS of Y on the initial index); c0 comes from
/// penalized functional linear regression.
InitPair init_linear(const FsimDataset& ds, const FsimBases& bases, double lambda_beta);

/// BFGS minimization of the penalized criterion with one restart: after first
/// convergence the Hessian approximation resets to identity and the optimizer
/// runs a second time.
FsimFit fit_fsim(const FsimDataset& ds, const FsimBases& bases, double lambda_g,
                 double lambda_beta, const std::optional<InitPair>& init = std::nullopt,
                 const FitOptions& opts = {});

struct GridCell {
    double lambda_g = 0.0;
    double lambda_beta = 0.0;
};

/// Rectangular lambda lattice of fits, flattened row-major (lambda_g outer).
struct FsimGrid {
    std::vector<GridCell> cells;
    std::vector<std::optional<FsimFit>> fits;
    std::vector<std::string> failures;  // per-cell reason, "" where fit succeeded
    int n_lambda_g = 0;
    int n_lambda_beta = 0;
    int gcv_cell = -1;
    double sigma_gcv = 0.0;
    double y_scale = 1.0;  // max(1, ||Y||_inf), the reference for degeneracy checks
    int n_sweeps = 0;
};

/// First pass fits every cell from the linear initialization; later sweeps
/// re-fit each cell from its up-to-8 neighbors keeping the best objective,
/// until the maximum relative improvement drops below 1% (at most 10 sweeps).
/// Every fit's sigma_hat is then pinned to the GCV-selected cell's value.
FsimGrid warm_start_grid(const FsimDataset& ds, const FsimBases& bases,
                         const Vector& lambda_g_grid, const Vector& lambda_beta_grid,
                         const FitOptions& opts = {});

/// Sandwich covariance of (d, c): sigma^2 H^-1 Z'Z H^-1 with the expected
/// Hessian H built from Zg = Phi and Zb = diag(Phi^(1) d) Psi.
Matrix coef_covariance(const FsimFit& fit);

Matrix fsim_smoother_matrix(const FsimFit& fit);
double fsim_gcv(const FsimFit& fit);
double fsim_sigma_hat(const FsimFit& fit);

/// Unit-norm, sign-fixed representative of c: beta(a) >= 0.
Vector normalize_sign_fix(const Vector& c, const BasisSystem& beta_basis);

/// Coefficients of s -> g(-s) on a basis symmetric about 0. Combined with
/// c -> -c this is an exact model symmetry; fit_fsim uses it to report the
/// beta(a) >= 0 representative without putting a sign discontinuity into the
/// optimized objective.
Vector reflect_link_coefficients(const Vector& d, const BasisSystem& g_basis);

namespace detail {

/// Linearization pieces of the fitted model at its own coefficients.
struct Linearization {
    Matrix zg;  // n x K1
    Matrix zb;  // n x K2
    Matrix h;   // (K1+K2)^2 expected Hessian
};
Linearization linearize(const FsimFit& fit);

struct SmootherTraces {
    double tr_s = 0.0;
    double tr_ss = 0.0;
};
/// Traces of S = Z H^-1 Z' without materializing it. Zero-column blocks are
/// allowed (drops the corresponding penalty block).
SmootherTraces smoother_traces(const Matrix& zg, const Matrix& zb, const Matrix& pg,
                               const Matrix& pb, double lambda_g, double lambda_beta);
Matrix smoother_dense(const Matrix& zg, const Matrix& zb, const Matrix& pg, const Matrix& pb,
                      double lambda_g, double lambda_beta);

}  // namespace detail

}  // namespace jenseff
