#include "jenseff/smoothing.hpp"
#include "jenseff/errors.hpp"
#include "jenseff/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace jenseff {

namespace detail {

int penalty_nullity(const BasisSystem& basis, int deriv) {
    if (deriv == 0) return 0;
    // bspline spans contain polynomials below the derivative order; the
    // fourier span only contains constants
    if (basis.kind == BasisKind::bspline) return std::min(deriv, basis.n_basis);
    return 1;
}

namespace {

// LLT claims success on numerically singular matrices with garbage pivots;
// require a sane pivot spread before trusting the factor for whitening.
bool llt_usable(const Eigen::LLT<Matrix>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const Vector d = llt.matrixLLT().diagonal();
    const double lo = d.minCoeff(), hi = d.maxCoeff();
    return lo > 0.0 && (lo / hi) * (lo / hi) > 1e-12;
}

}  // namespace

DemmlerReinsch demmler_reinsch(const Matrix& phi, const Matrix& penalty, int nullity) {
    const Matrix gram = phi.transpose() * phi;
    const double mean_diag = gram.diagonal().cwiseAbs().mean();

    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;
    llt.compute(gram);
    if (!llt_usable(llt)) {
        if (!(mean_diag > 0.0))
            throw IllConditionedError("demmler_reinsch: zero design");
        bool ok = false;
        for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
            jitter = rel * mean_diag;
            llt.compute(gram + jitter * Matrix::Identity(gram.rows(), gram.cols()));
            if (llt_usable(llt)) {
                ok = true;
                break;
            }
        }
        if (!ok)
            throw IllConditionedError("demmler_reinsch: design factorization failed after jitter");
    }

    // whitened penalty L^-1 P L^-'
    const Matrix linv_p = llt.matrixL().solve(penalty);
    Matrix white = llt.matrixL().solve(linv_p.transpose());
    white = 0.5 * (white + white.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> es(white);
    DemmlerReinsch dr;
    dr.gamma = es.eigenvalues().cwiseMax(0.0);
    // eigenvalues are ascending: pin the known unpenalized modes to zero
    for (Index j = 0; j < std::min<Index>(nullity, dr.gamma.size()); ++j) dr.gamma[j] = 0.0;
    dr.back = llt.matrixU().solve(es.eigenvectors());  // L^-' U
    dr.w = phi * dr.back;
    dr.w_gram = dr.w.transpose() * dr.w;
    dr.jitter = jitter;
    return dr;
}

}  // namespace detail

namespace {

struct FitPieces {
    Vector coef;
    Vector fitted;
    double rss = 0.0;
    double tr_s = 0.0;
    double tr_ss = 0.0;
};

FitPieces evaluate_at_lambda(const detail::DemmlerReinsch& dr, const Vector& wty,
                             const Vector& y, double lambda) {
    const Index k = dr.gamma.size();
    Vector shrink(k);
    for (Index j = 0; j < k; ++j) shrink[j] = 1.0 / (1.0 + lambda * dr.gamma[j]);
    FitPieces out;
    const Vector modes = shrink.asDiagonal() * wty;
    out.coef = dr.back * modes;
    out.fitted = dr.w * modes;
    out.rss = (y - out.fitted).squaredNorm();
    // exact traces of S = W diag(shrink) W' even when jitter left W'W != I:
    // tr(S) = sum shrink_k B_kk, tr(SS') = sum shrink_k shrink_l B_kl^2
    out.tr_s = shrink.dot(dr.w_gram.diagonal());
    out.tr_ss = shrink.dot(dr.w_gram.cwiseAbs2() * shrink);
    return out;
}

void check_fit_inputs(const Vector& x, const Vector& y, double lambda) {
    if (x.size() != y.size())
        throw std::invalid_argument("fit_smooth: x and y lengths differ");
    if (x.size() < 2)
        throw std::invalid_argument("fit_smooth: need at least 2 observations");
    if (!(lambda >= 0.0))
        throw std::invalid_argument("fit_smooth: lambda must be nonnegative");
}

}  // namespace

SmoothFit fit_smooth(const Vector& x, const Vector& y, const BasisSystem& basis, double lambda) {
    check_fit_inputs(x, y, lambda);
    const Matrix phi = eval_basis(basis, x, 0);
    const auto dr = detail::demmler_reinsch(phi, penalty_matrix(basis, 2), detail::penalty_nullity(basis, 2));
    const Vector wty = dr.w.transpose() * y;
    const FitPieces p = evaluate_at_lambda(dr, wty, y, lambda);

    SmoothFit fit;
    fit.basis = basis;
    fit.lambda = lambda;
    fit.x = x;
    fit.y = y;
    fit.coef = p.coef;
    fit.rss = p.rss;
    fit.hat_trace = p.tr_s;
    fit.hat_trace2 = p.tr_ss;
    return fit;
}

Vector fitted_values(const SmoothFit& fit) {
    return eval_basis(fit.basis, fit.x, 0) * fit.coef;
}

Vector predict(const SmoothFit& fit, const Vector& at, int deriv) {
    return eval_basis(fit.basis, at, deriv) * fit.coef;
}

Matrix smoother_matrix(const SmoothFit& fit) {
    const Matrix phi = eval_basis(fit.basis, fit.x, 0);
    const auto dr = detail::demmler_reinsch(phi, penalty_matrix(fit.basis, 2), detail::penalty_nullity(fit.basis, 2));
    Vector shrink(dr.gamma.size());
    for (Index j = 0; j < shrink.size(); ++j)
        shrink[j] = 1.0 / (1.0 + fit.lambda * dr.gamma[j]);
    Matrix s = dr.w * shrink.asDiagonal() * dr.w.transpose();
    return 0.5 * (s + s.transpose());
}

double gcv(const SmoothFit& fit) {
    const double n = static_cast<double>(fit.x.size());
    const double denom = n - fit.hat_trace;
    if (!(denom > 0.0))
        throw DegenerateSmootherError("gcv: tr(S) >= n");
    return n * fit.rss / (denom * denom);
}

double sigma_hat(const SmoothFit& fit) {
    const double n = static_cast<double>(fit.x.size());
    const double df_res = n - 2.0 * fit.hat_trace + fit.hat_trace2;
    if (!(df_res > 0.0))
        throw DegenerateSmootherError("sigma_hat: residual degrees of freedom <= 0");
    return std::sqrt(fit.rss / df_res);
}

LambdaSelection select_lambda_gcv(const Vector& x, const Vector& y, const BasisSystem& basis,
                                  const Vector& lambda_grid) {
    if (lambda_grid.size() == 0)
        throw std::invalid_argument("select_lambda_gcv: empty lambda grid");
    check_fit_inputs(x, y, 0.0);

    const Matrix phi = eval_basis(basis, x, 0);
    const auto dr = detail::demmler_reinsch(phi, penalty_matrix(basis, 2), detail::penalty_nullity(basis, 2));
    const Vector wty = dr.w.transpose() * y;
    const double n = static_cast<double>(x.size());

    bool have_best = false;
    double best_gcv = 0.0;
    double best_lambda = 0.0;
    for (Index i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] >= 0.0))
            throw std::invalid_argument("select_lambda_gcv: lambda must be nonnegative");
        const FitPieces p = evaluate_at_lambda(dr, wty, y, lambda_grid[i]);
        if (!(n - p.tr_s > 0.0)) continue;
        const double score = n * p.rss / ((n - p.tr_s) * (n - p.tr_s));
        // Value-based comparison with ties toward larger lambda keeps the
        // selection invariant under grid reordering.
        if (!have_best || score < best_gcv ||
            (score == best_gcv && lambda_grid[i] > best_lambda)) {
            have_best = true;
            best_gcv = score;
            best_lambda = lambda_grid[i];
        }
    }
    if (!have_best)
        throw DegenerateSmootherError("select_lambda_gcv: every grid point degenerate");

    LambdaSelection sel;
    sel.lambda = best_lambda;
    const FitPieces p = evaluate_at_lambda(dr, wty, y, best_lambda);
    sel.fit.basis = basis;
    sel.fit.lambda = best_lambda;
    sel.fit.x = x;
    sel.fit.y = y;
    sel.fit.coef = p.coef;
    sel.fit.rss = p.rss;
    sel.fit.hat_trace = p.tr_s;
    sel.fit.hat_trace2 = p.tr_ss;
    return sel;
}

}  // namespace jenseff
