#pragma once

#include "jenseff/types.hpp"

namespace jenseff {

enum class BasisKind { bspline, fourier };

/// A finite basis on a closed interval, with evaluation, derivatives and
/// penalty/Gram matrices. Immutable after construction.
///
/// bspline: clamped B-splines of order k (= degree + 1) with equally spaced
/// interior knots; n_basis = #interior knots + order.
/// fourier: the constant plus sin/cos pairs at integer frequencies, each
/// scaled to unit L2 norm on the domain (so the system is orthonormal).
struct BasisSystem {
    BasisKind kind = BasisKind::bspline;
    Interval domain;
    int n_basis = 0;
    int order = 0;   // bspline only
    Vector knots;    // bspline only: full clamped knot vector, n_basis + order entries
};

BasisSystem make_bspline_basis(Interval domain, int n_basis, int order);
BasisSystem make_fourier_basis(Interval domain, int n_basis);

/// Rows are deriv-th derivatives of every basis function at the given points.
/// Points outside the domain raise OutOfDomainError; clamping is the caller's
/// explicit policy.
Matrix eval_basis(const BasisSystem& b, const Vector& points, int deriv = 0);
RowVector eval_basis_at(const BasisSystem& b, double x, int deriv = 0);

/// [P]_ij = integral of the product of deriv-th derivatives over the domain.
/// Gauss-Legendre per knot interval for splines (exact), analytic diagonal
/// for the orthonormal Fourier system.
Matrix penalty_matrix(const BasisSystem& b, int deriv = 2);

/// [G]_ij = integral of a_i * b_j over the (shared) domain.
Matrix inner_product_matrix(const BasisSystem& a, const BasisSystem& b);

/// Knot averages; coefficients of a linear function are its values here.
Vector greville_abscissae(const BasisSystem& b);

/// Band evaluation for hot loops: fills ders (rows 0..max_deriv, order columns)
/// with derivatives of the `order` active functions at x and returns the first
/// active basis index.
int eval_bspline_span(const BasisSystem& b, double x, int max_deriv, Matrix& ders);

namespace detail {
/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, Vector& nodes, Vector& weights);
}  // namespace detail

}  // namespace jenseff
