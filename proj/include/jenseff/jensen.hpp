#pragma once

#include "jenseff/fsim.hpp"
#include "jenseff/smoothing.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jenseff {

enum class SignSummary { all_positive, all_negative, mixed };
std::string to_string(SignSummary s);

struct SigmaUse {
    double sigma = 0.0;
    double lambda_g = 0.0;
    double lambda_beta = 0.0;  // NaN for the single-lambda test
    int cell = -1;             // flattened grid index it came from
};

/// The Jensen-effect surface over a smoothing-parameter grid: per-cell effect,
/// standard error and t, the null correlation of the cells, and the max-|t|
/// decision against a simulated critical value.
struct JensenSurface {
    std::vector<GridCell> grid;  // lambda_beta is NaN for the known-index test
    int n_lambda_g = 0;
    int n_lambda_beta = 0;  // 0 for the known-index test
    Vector delta;
    Vector sd;
    Vector t;
    std::vector<char> valid;            // cells excluded from the max are 0
    std::vector<std::string> failures;  // reason per excluded cell
    Matrix A;                           // correlation over valid cells, flattened order
    double T_obs = 0.0;
    double crit = 0.0;
    double alpha = 0.05;
    int n_null_draws = 0;
    bool reject = false;
    SignSummary sign_summary = SignSummary::mixed;
    SigmaUse sigma_used;
    std::uint64_t seed = 0;
    int gcv_cell = -1;
    int argmax_delta_cell = -1;
    int argmin_delta_cell = -1;
};

/// Weights u such that u.Y is the plug-in Jensen effect of the penalized
/// smooth at penalty lambda: u = a' Phi+ (Phi'Phi + lambda P)^-1 Phi' with
/// a = (1/n, ..., 1/n, -1)' and Phi+ evaluated at (E_1..E_n, mean E).
RowVector delta_weights_t1(const Vector& E, const BasisSystem& basis, double lambda);

/// A_ij = <u_i, u_j> / (||u_i|| ||u_j||) over rows of U.
Matrix null_correlation(const Matrix& U);

/// Empirical (1-alpha) quantile of max_j |z_j|, z ~ N(0, A), via a PSD
/// square root; deterministic given the seed. Eigenvalues in [-1e-8, 0) are
/// clamped to zero, more negative ones are an error.
double simulate_max_null(const Matrix& A, int n_draws, double alpha, std::uint64_t seed);

/// Known-index test: scans lambda_grid, pins sigma-hat at the GCV-selected
/// lambda, and rejects when max |t| exceeds the simulated critical value.
JensenSurface jensen_test_t1(const Vector& E, const Vector& Y, const BasisSystem& basis,
                             const Vector& lambda_grid, double alpha = 0.05, int n_draws = 5000,
                             std::uint64_t seed = 1);

struct DeltaSd {
    double delta = 0.0;
    double sd = 0.0;
};

/// delta = mean g(index) - g(mean index); sd from the d-block of the
/// sandwich covariance through the same linear functional.
DeltaSd delta_hat_fsim(const FsimFit& fit);

/// Full-model test over a rectangular (lambda_g, lambda_beta) lattice:
/// warm-started fits, sigma-hat pinned at the GCV cell, per-cell u from the
/// linearization at that cell's coefficient estimate. Failed cells are
/// excluded from the max (recorded, never imputed); more than 20% failures
/// invalidates the surface.
JensenSurface jensen_test_fsim(const FsimDataset& ds, const FsimBases& bases,
                               const Vector& lambda_g_grid, const Vector& lambda_beta_grid,
                               double alpha = 0.05, int n_draws = 5000, std::uint64_t seed = 1,
                               const FitOptions& opts = {});

/// Same test on an already-fitted grid (used by drivers that keep the fits).
JensenSurface jensen_test_from_grid(const FsimGrid& grid, double alpha, int n_draws,
                                    std::uint64_t seed);

}  // namespace jenseff
