#pragma once

#include "jenseff/basis.hpp"
#include "jenseff/types.hpp"

namespace jenseff {

/// Penalized linear smooth of scalar pairs: coef minimizes
/// ||y - Phi coef||^2 + lambda coef' P coef with the second-derivative penalty.
struct SmoothFit {
    BasisSystem basis;
    double lambda = 0.0;
    Vector coef;
    Vector x;
    Vector y;
    double hat_trace = 0.0;   // tr(S)
    double hat_trace2 = 0.0;  // tr(S S')
    double rss = 0.0;
};

SmoothFit fit_smooth(const Vector& x, const Vector& y, const BasisSystem& basis, double lambda);

Vector fitted_values(const SmoothFit& fit);
Vector predict(const SmoothFit& fit, const Vector& at, int deriv = 0);

/// S = Phi (Phi'Phi + lambda P)^-1 Phi', materialized densely.
Matrix smoother_matrix(const SmoothFit& fit);

/// GCV(lambda) = (1/n)||(I-S)Y||^2 / [(1/n) tr(I-S)]^2.
double gcv(const SmoothFit& fit);

/// sigma-hat = sqrt(rss / df_res), df_res = n - 2 tr(S) + tr(S S').
double sigma_hat(const SmoothFit& fit);

struct LambdaSelection {
    double lambda = 0.0;
    SmoothFit fit;
};

/// Grid minimizer of GCV; ties break toward the larger (smoother) lambda.
LambdaSelection select_lambda_gcv(const Vector& x, const Vector& y, const BasisSystem& basis,
                                  const Vector& lambda_grid);

namespace detail {

/// Demmler-Reinsch diagonalization of the penalized system: with G = Phi'Phi
/// = LL' and L^-1 P L^-' = U Gamma U', every lambda acts as the diagonal
/// shrinkage 1/(1 + lambda gamma_k) on orthonormal modes W = Phi L^-' U.
/// This keeps the penalty null space exact at arbitrarily large lambda, where
/// solving (G + lambda P) directly loses all significant digits.
struct DemmlerReinsch {
    Matrix w;       // n x K mode columns (orthonormal when no jitter was needed)
    Vector gamma;   // K nonnegative mode penalties
    Matrix back;    // K x K: basis coefficients = back * mode coefficients
    Matrix w_gram;  // W'W, identity up to the jitter perturbation
    double jitter = 0.0;
};

/// penalty_nullity is the analytically known null-space dimension of the
/// penalty; that many of the smallest whitened eigenvalues are pinned to
/// exact zero so unpenalized modes survive arbitrarily large lambda.
DemmlerReinsch demmler_reinsch(const Matrix& phi, const Matrix& penalty, int penalty_nullity);

/// Null dimension of the deriv-th derivative penalty on this basis.
int penalty_nullity(const BasisSystem& basis, int deriv = 2);

}  // namespace detail

}  // namespace jenseff
