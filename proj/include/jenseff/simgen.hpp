#pragma once

#include "jenseff/jensen.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jenseff {

enum class LinkName { exp_pos, exp_neg, neg_square, linear, power_family };

/// Scalar link with two derivatives; power_family is s + eta * exp(-s).
struct LinkSpec {
    LinkName name = LinkName::linear;
    double eta = 0.0;

    double operator()(double s) const;
    double d1(double s) const;
    double d2(double s) const;
};

LinkSpec parse_link(const std::string& name, double eta = 0.0);
std::string to_string(const LinkSpec& link);

/// Five uniform covariates on [-0.5, 0.5] with equal-weight unit-norm
/// coefficients; returns the known index alongside the responses.
struct SimData {
    Matrix X;  // n x 5
    Vector Y;
    Vector E;  // known index x'beta
};
SimData gen_sim_data(int n, const LinkSpec& link, double sigma, std::uint64_t seed);

struct FsimSimData {
    FsimDataset ds;
    Vector true_index;
    Vector beta_on_grid;   // true coefficient function sampled on ds.t_grid
    double noise_sd = 0.0; // the sd the noise was actually drawn with
};

/// Curves from a 25-dimensional orthonormal Fourier system with geometrically
/// decaying score variances, sampled on a 201-point grid over [0, 1].
FsimSimData gen_fsim_data(int n, const LinkSpec& link, double sigma, std::uint64_t seed);

/// Four-harmonic curves around the mean function t, with noise variance set
/// to 10% of the empirical variance of the true signal.
FsimSimData gen_four_harmonic_data(int n, const LinkSpec& link, std::uint64_t seed);

enum class StudyDesign { sim, fsim };
StudyDesign parse_design(const std::string& name);
std::string to_string(StudyDesign d);

struct StudyConfig {
    StudyDesign design = StudyDesign::sim;
    int n = 100;
    double sigma = 0.1;
    LinkSpec link;
    int n_reps = 200;
    Vector lambda_grid;       // known-index test; empty = default 41 pts, log10 in [-8, 4]
    Vector lambda_g_grid;     // full-model test; empty = default 5 pts, log10 in [-6, 2]
    Vector lambda_beta_grid;  // full-model test; empty = default 5 pts, log10 in [-2, 6]
    int n_null_draws = 5000;
    double alpha = 0.05;
    std::uint64_t base_seed = 1;
    int jobs = 1;  // replicate-level workers; results are index-ordered either way
};

Vector default_t1_lambda_grid();
Vector default_fsim_lambda_g_grid();
Vector default_fsim_lambda_beta_grid();

struct RepResult {
    std::uint64_t seed = 0;
    bool reject = false;
    double T_obs = 0.0;
    double crit = 0.0;
    double sigma_hat = 0.0;
    double delta_at_gcv = 0.0;
    std::string sign_summary;
    bool failed = false;
    std::string error;
};

struct StudyResult {
    double rate = 0.0;  // failures count as non-rejections
    int n_reject = 0;
    int n_failed = 0;
    std::vector<RepResult> per_seed;
};

/// Runs the configured test once per replicate with seeds base_seed + r;
/// fully deterministic.
StudyResult run_rejection_study(const StudyConfig& cfg);

struct PowerPoint {
    double eta = 0.0;
    double rate = 0.0;
    int n_reps = 0;
};

/// One rejection study per eta with the power-family link.
std::vector<PowerPoint> run_power_curve(const StudyConfig& base, const Vector& eta_grid);

/// Root integrated squared error of the coefficient function, sign-aligned
/// (the smaller of the two signed comparisons).
double rse(const Vector& beta_hat_on_grid, const Vector& beta_true_on_grid,
           const Vector& t_grid);

/// Root average squared error of the k-th derivative of the fitted link at
/// the estimated index, against the true derivative at the true index.
double rase_k(const FsimFit& fit, const LinkSpec& truth, const Vector& true_index, int k);

/// One instance fitted from a truth-based and an equal-coefficient start;
/// reports the error metrics and curvature spread of both.
struct CurvatureFitReport {
    std::string init;
    double rse = 0.0;
    double rase0 = 0.0;
    double rase1 = 0.0;
    double rase2 = 0.0;
    double sup_abs_g2 = 0.0;  // sup |g''| over the index range
    double coef_norm = 0.0;
    double lambda_g = 0.0;
    double lambda_beta = 0.0;
};

struct CurvatureReport {
    std::uint64_t seed = 0;
    CurvatureFitReport truth_init;
    CurvatureFitReport equal_init;
    double sup_g2_difference = 0.0;  // sup over the common range of |g2_a - g2_b|
};

CurvatureReport curvature_demo(std::uint64_t seed = 6);

/// Bases the studies fit with (shared by drivers and tests).
FsimBases fsim_study_bases(const FsimDataset& ds);
BasisSystem t1_study_basis(const Vector& E);

}  // namespace jenseff
