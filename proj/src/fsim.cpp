#include "jenseff/fsim.hpp"
#include "jenseff/errors.hpp"
#include "jenseff/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jenseff {

void validate_dataset(const FsimDataset& ds) {
    const Index n = ds.Y.size();
    if (ds.t_grid.size() < 2)
        throw std::invalid_argument("FsimDataset: t_grid needs at least 2 points");
    if (ds.X.rows() != n || ds.X.cols() != ds.t_grid.size())
        throw std::invalid_argument("FsimDataset: X dimensions inconsistent with Y and t_grid");
    if (n < 10)
        throw std::invalid_argument("FsimDataset: need at least 10 observations");
    for (Index i = 1; i < ds.t_grid.size(); ++i)
        if (!(ds.t_grid[i] > ds.t_grid[i - 1]))
            throw std::invalid_argument("FsimDataset: t_grid must be strictly increasing");
    if (!ds.Y.allFinite() || !ds.X.allFinite() || !ds.t_grid.allFinite())
        throw std::invalid_argument("FsimDataset: non-finite values");
}

namespace {

Vector trapezoid_weights(const Vector& t) {
    const Index m = t.size();
    Vector w = Vector::Zero(m);
    for (Index j = 0; j + 1 < m; ++j) {
        const double h = 0.5 * (t[j + 1] - t[j]);
        w[j] += h;
        w[j + 1] += h;
    }
    return w;
}

void require_grid_in_domain(const Vector& t, const BasisSystem& basis, const char* what) {
    const double tol = 1e-9 * std::max(1.0, basis.domain.length());
    if (t[0] < basis.domain.a - tol || t[t.size() - 1] > basis.domain.b + tol)
        throw std::invalid_argument(std::string(what) + ": sample grid outside basis domain");
}

}  // namespace

Matrix functional_design(const FsimDataset& ds, const BasisSystem& beta_basis) {
    require_grid_in_domain(ds.t_grid, beta_basis, "functional_design");
    Vector t = ds.t_grid;
    // guard roundoff at the boundary so eval stays in-domain
    for (Index j = 0; j < t.size(); ++j)
        t[j] = std::clamp(t[j], beta_basis.domain.a, beta_basis.domain.b);
    const Matrix b = eval_basis(beta_basis, t, 0);
    const Vector w = trapezoid_weights(ds.t_grid);
    return ds.X * (w.asDiagonal() * b);
}

IndexRange index_range(const FsimDataset& ds) {
    const Index n = ds.X.rows();
    if (n < 2) throw std::invalid_argument("index_range: need at least 2 curves");
    const Vector w = trapezoid_weights(ds.t_grid);
    const Matrix gram = ds.X * w.asDiagonal() * ds.X.transpose();

    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const double mu = es.eigenvalues()(n - 1);
    if (!(mu > 1e-12 * std::max(1.0, gram.diagonal().maxCoeff())) || !(gram.diagonal().maxCoeff() > 0.0))
        throw std::invalid_argument("index_range: curves are all (numerically) zero");

    // score_i = <X_i, leading PC> = sqrt(mu) * v_i for unit-norm PC.
    const Vector v = es.eigenvectors().col(n - 1);
    IndexRange r;
    r.pca_score = std::sqrt(mu) * v.cwiseAbs().maxCoeff();
    r.max_curve_norm = std::sqrt(gram.diagonal().maxCoeff());
    r.curve_norm_active = r.max_curve_norm > r.pca_score;
    r.value = std::max(r.pca_score, r.max_curve_norm);
    return r;
}

ClampResult index_clamp(double s, double S) {
    if (!(S > 0.0)) throw std::invalid_argument("index_clamp: S must be positive");
    ClampResult r;
    r.value = std::clamp(s, -S, S);
    r.excess = std::abs(s) > S ? std::abs(s) - S : 0.0;
    return r;
}

Vector normalize_sign_fix(const Vector& c, const BasisSystem& beta_basis) {
    const double nrm = c.norm();
    if (!(nrm > 0.0))
        throw std::invalid_argument("normalize_sign_fix: zero coefficient vector");
    Vector u = c / nrm;
    const RowVector psi_a = eval_basis_at(beta_basis, beta_basis.domain.a, 0);
    if (psi_a.dot(u) < 0.0) u = -u;
    return u;
}

Vector reflect_link_coefficients(const Vector& d, const BasisSystem& g_basis) {
    // coefficients of s -> g(-s) on a basis symmetric about 0
    if (g_basis.kind == BasisKind::bspline) return d.reverse();
    Vector out = d;
    for (Index j = 1; j < out.size(); j += 2) out[j] = -out[j];  // sine terms flip
    return out;
}

namespace {

/// Shared per-dataset state for repeated objective/gradient evaluations.
/// Not thread-safe per instance (scratch buffers); fit_fsim builds its own.
class PlsEvaluator {
public:
    PlsEvaluator(const FsimDataset& ds, const FsimBases& bases)
        : y(ds.Y),
          g_basis(bases.g),
          beta_basis(bases.beta),
          psi(functional_design(ds, bases.beta)),
          pg(penalty_matrix(bases.g, 2)),
          pb(penalty_matrix(bases.beta, 2)),
          psi_at_a(eval_basis_at(bases.beta, bases.beta.domain.a, 0)) {
        const Interval dom = bases.g.domain;
        if (std::abs(dom.a + dom.b) > 1e-9 * dom.length())
            throw std::invalid_argument("fsim: g basis domain must be symmetric about 0");
        s_range = dom.b;
        n = y.size();
        k1 = bases.g.n_basis;
        k2 = bases.beta.n_basis;
        e.resize(n);
        s.resize(n);
        resid.resize(n);
        vmix.resize(n);
        if (g_basis.kind == BasisKind::bspline) {
            band0.resize(n, g_basis.order);
            first.resize(n);
        }
    }

    Index dim() const { return k1 + k2; }

    // theta = [d; c]; returns objective, fills grad when non-null.
    // c enters through its normalization c/||c|| only; the beta(a) >= 0
    // convention is applied to returned fits via the reflection symmetry, so
    // the optimized objective stays continuous in c.
    double eval(const Vector& theta, double lambda_g, double lambda_beta, Vector* grad) {
        const auto d = theta.head(k1);
        const auto c = theta.tail(k2);
        const double cnorm = c.norm();
        if (!(cnorm > 0.0))
            throw std::invalid_argument("pls_objective: zero c (cannot normalize)");
        const Vector u = c / cnorm;
        const Vector& ctilde = u;

        e.noalias() = psi * ctilde;

        double obj = 0.0;
        double excess_total = 0.0;
        const bool g_is_spline = g_basis.kind == BasisKind::bspline;
        const int order = g_basis.order;

        Matrix ders;
        RowVector row0, row1;
        for (Index i = 0; i < n; ++i) {
            const double si = std::clamp(e[i], -s_range, s_range);
            s[i] = si;
            const bool clamped = std::abs(e[i]) > s_range;
            if (clamped) excess_total += std::abs(e[i]) - s_range;

            double fit_i = 0.0, slope_i = 0.0;
            if (g_is_spline) {
                const int f0 = eval_bspline_span(g_basis, si, 1, ders);
                first[i] = f0;
                for (int j = 0; j < order; ++j) {
                    band0(i, j) = ders(0, j);
                    fit_i += ders(0, j) * d[f0 + j];
                    slope_i += ders(1, j) * d[f0 + j];
                }
            } else {
                row0 = eval_basis_at(g_basis, si, 0);
                row1 = eval_basis_at(g_basis, si, 1);
                fit_i = row0.dot(d);
                slope_i = row1.dot(d);
            }
            const double r = y[i] - fit_i;
            resid[i] = r;
            vmix[i] = clamped ? (e[i] > 0.0 ? 1.0 : -1.0) : -2.0 * r * slope_i;
            obj += r * r;
        }
        obj += lambda_g * d.dot(pg * d) + lambda_beta * ctilde.dot(pb * ctilde) + excess_total;

        if (grad) {
            grad->resize(k1 + k2);
            auto gd = grad->head(k1);
            auto gc = grad->tail(k2);

            gd.setZero();
            if (g_is_spline) {
                for (Index i = 0; i < n; ++i) {
                    const double w = -2.0 * resid[i];
                    for (int j = 0; j < order; ++j) gd[first[i] + j] += w * band0(i, j);
                }
            } else {
                for (Index i = 0; i < n; ++i)
                    gd -= 2.0 * resid[i] * eval_basis_at(g_basis, s[i], 0).transpose();
            }
            gd.noalias() += 2.0 * lambda_g * (pg * d);

            Vector grad_ctilde = psi.transpose() * vmix;
            grad_ctilde.noalias() += 2.0 * lambda_beta * (pb * ctilde);
            // chain through c -> c/||c||
            gc = (grad_ctilde - u * u.dot(grad_ctilde)) / cnorm;
        }
        return obj;
    }

    Vector y;
    BasisSystem g_basis;
    BasisSystem beta_basis;
    Matrix psi;
    Matrix pg, pb;
    RowVector psi_at_a;
    double s_range = 0.0;
    Index n = 0, k1 = 0, k2 = 0;

private:
    // scratch
    Vector e, s, resid, vmix;
    Matrix band0;
    std::vector<int> first;
};

double evaluate_rss(const PlsEvaluator& ev, const Vector& d, const Vector& index) {
    double rss = 0.0;
    Matrix ders;
    for (Index i = 0; i < index.size(); ++i) {
        const double si = std::clamp(index[i], -ev.s_range, ev.s_range);
        double fit_i = 0.0;
        if (ev.g_basis.kind == BasisKind::bspline) {
            const int first = eval_bspline_span(ev.g_basis, si, 0, ders);
            for (int j = 0; j < ev.g_basis.order; ++j) fit_i += ders(0, j) * d[first + j];
        } else {
            fit_i = eval_basis_at(ev.g_basis, si, 0).dot(d);
        }
        const double r = ev.y[i] - fit_i;
        rss += r * r;
    }
    return rss;
}

InitPair init_linear_impl(const PlsEvaluator& ev, double lambda_beta) {
    const Matrix& psi = ev.psi;
    SpdSolver solver(Matrix(psi.transpose() * psi + lambda_beta * ev.pb));
    Vector c0 = solver.solve(Vector(psi.transpose() * ev.y));
    if (c0.norm() < 1e-12)
        throw DegenerateDataError("init_linear: functional linear regression is identically zero");
    c0 = normalize_sign_fix(c0, ev.beta_basis);

    Vector s = psi * c0;
    for (Index i = 0; i < s.size(); ++i) s[i] = std::clamp(s[i], -ev.s_range, ev.s_range);
    const double sbar = s.mean(), ybar = ev.y.mean();
    const double svar = (s.array() - sbar).square().sum();
    const double gamma = svar > 0.0 ? (s.array() - sbar).matrix().dot(ev.y) / svar : 0.0;
    const double alpha = ybar - gamma * sbar;

    // represent alpha + gamma*s exactly in the g basis
    Vector d0(ev.k1);
    if (ev.g_basis.kind == BasisKind::bspline) {
        const Vector grev = greville_abscissae(ev.g_basis);
        for (Index j = 0; j < ev.k1; ++j) d0[j] = alpha + gamma * grev[j];
    } else {
        // Fourier basis cannot represent a line exactly; least-squares projection
        Vector pts(201);
        for (int j = 0; j < 201; ++j)
            pts[j] = ev.g_basis.domain.a + ev.g_basis.domain.length() * j / 200.0;
        const Matrix b = eval_basis(ev.g_basis, pts, 0);
        Vector line(201);
        for (int j = 0; j < 201; ++j) line[j] = alpha + gamma * pts[j];
        SpdSolver ls(Matrix(b.transpose() * b));
        d0 = ls.solve(Vector(b.transpose() * line));
    }
    return {std::move(c0), std::move(d0)};
}

FsimFit fit_with_evaluator(PlsEvaluator& ev, double lambda_g, double lambda_beta,
                           const std::optional<InitPair>& init, const FitOptions& opts) {
    if (!(lambda_g >= 0.0) || !(lambda_beta >= 0.0))
        throw std::invalid_argument("fit_fsim: smoothing parameters must be nonnegative");

    InitPair start = init ? *init : init_linear_impl(ev, lambda_beta);
    if (start.c0.size() != ev.k2 || start.d0.size() != ev.k1)
        throw std::invalid_argument("fit_fsim: initialization has wrong dimensions");

    Vector theta0(ev.dim());
    theta0 << start.d0, start.c0;

    BfgsOptions bopt;
    bopt.rel_obj_tol = opts.rel_obj_tol;
    bopt.grad_tol = opts.grad_tol;
    bopt.max_iterations = opts.max_iterations;

    const ObjectiveFn fn = [&](const Vector& th, Vector& gr) {
        return ev.eval(th, lambda_g, lambda_beta, &gr);
    };

    // Run, then restart once with a fresh Hessian approximation.
    const BfgsResult run1 = bfgs_minimize(fn, theta0, bopt);
    const BfgsResult run2 = bfgs_minimize(fn, run1.x, bopt);

    FsimFit fit;
    fit.d = run2.x.head(ev.k1);
    Vector c_final = run2.x.tail(ev.k2);
    const double c_norm = c_final.norm();
    if (!(c_norm > 0.0))
        throw std::invalid_argument("fit_fsim: optimizer returned a zero coefficient vector");
    c_final /= c_norm;
    if (ev.psi_at_a.dot(c_final) < 0.0) {
        // switch to the beta(a) >= 0 representative; fitted values unchanged
        c_final = -c_final;
        fit.d = reflect_link_coefficients(fit.d, ev.g_basis);
    }
    fit.c = c_final;
    fit.lambda_g = lambda_g;
    fit.lambda_beta = lambda_beta;
    fit.g_basis = ev.g_basis;
    fit.beta_basis = ev.beta_basis;
    fit.Psi = ev.psi;
    fit.index = ev.psi * fit.c;
    fit.index_bar = fit.index.mean();
    fit.s_range = ev.s_range;
    fit.converged = run2.converged;
    fit.n_restarts_used = 1;
    fit.total_iterations = run1.iterations + run2.iterations;

    Vector theta_final(ev.dim());
    theta_final << fit.d, fit.c;
    fit.objective = ev.eval(theta_final, lambda_g, lambda_beta, nullptr);
    fit.rss = evaluate_rss(ev, fit.d, fit.index);
    fit.n_clamped = 0;
    for (Index i = 0; i < fit.index.size(); ++i)
        if (std::abs(fit.index[i]) > fit.s_range) ++fit.n_clamped;

    // GCV and sigma-hat from the linearized smoother, reusing cached penalties.
    Vector s_clamped(ev.n);
    for (Index i = 0; i < ev.n; ++i)
        s_clamped[i] = std::clamp(fit.index[i], -ev.s_range, ev.s_range);
    const Matrix zg = eval_basis(ev.g_basis, s_clamped, 0);
    const Matrix phi1 = eval_basis(ev.g_basis, s_clamped, 1);
    const Matrix zb = (phi1 * fit.d).asDiagonal() * ev.psi;
    fit.gcv_value = std::numeric_limits<double>::quiet_NaN();
    fit.sigma_hat = std::numeric_limits<double>::quiet_NaN();
    try {
        const auto tr = detail::smoother_traces(zg, zb, ev.pg, ev.pb, lambda_g, lambda_beta);
        const double nn = static_cast<double>(ev.n);
        if (nn - tr.tr_s > 0.0)
            fit.gcv_value = nn * fit.rss / ((nn - tr.tr_s) * (nn - tr.tr_s));
        const double df_res = nn - 2.0 * tr.tr_s + tr.tr_ss;
        if (df_res > 0.0) fit.sigma_hat = std::sqrt(fit.rss / df_res);
    } catch (const IllConditionedError&) {
        // leave NaN: the cell is usable for the surface but not for GCV selection
    }
    return fit;
}

}  // namespace

double pls_objective(const Vector& c, const Vector& d, const FsimDataset& ds,
                     const FsimBases& bases, double lambda_g, double lambda_beta) {
    PlsEvaluator ev(ds, bases);
    Vector theta(ev.dim());
    theta << d, c;
    return ev.eval(theta, lambda_g, lambda_beta, nullptr);
}

Vector pls_gradient(const Vector& c, const Vector& d, const FsimDataset& ds,
                    const FsimBases& bases, double lambda_g, double lambda_beta) {
    PlsEvaluator ev(ds, bases);
    Vector theta(ev.dim());
    theta << d, c;
    Vector grad;
    ev.eval(theta, lambda_g, lambda_beta, &grad);
    return grad;
}

InitPair init_linear(const FsimDataset& ds, const FsimBases& bases, double lambda_beta) {
    PlsEvaluator ev(ds, bases);
    return init_linear_impl(ev, lambda_beta);
}

FsimFit fit_fsim(const FsimDataset& ds, const FsimBases& bases, double lambda_g,
                 double lambda_beta, const std::optional<InitPair>& init,
                 const FitOptions& opts) {
    validate_dataset(ds);
    PlsEvaluator ev(ds, bases);
    return fit_with_evaluator(ev, lambda_g, lambda_beta, init, opts);
}

FsimGrid warm_start_grid(const FsimDataset& ds, const FsimBases& bases,
                         const Vector& lambda_g_grid, const Vector& lambda_beta_grid,
                         const FitOptions& opts) {
    validate_dataset(ds);
    if (lambda_g_grid.size() == 0 || lambda_beta_grid.size() == 0)
        throw std::invalid_argument("warm_start_grid: empty lambda grid");

    PlsEvaluator ev(ds, bases);
    const int ng = static_cast<int>(lambda_g_grid.size());
    const int nb = static_cast<int>(lambda_beta_grid.size());

    FsimGrid grid;
    grid.n_lambda_g = ng;
    grid.n_lambda_beta = nb;
    grid.y_scale = std::max(1.0, ds.Y.cwiseAbs().maxCoeff());
    grid.cells.resize(static_cast<std::size_t>(ng) * nb);
    grid.fits.resize(grid.cells.size());
    grid.failures.assign(grid.cells.size(), "");
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < nb; ++j)
            grid.cells[i * nb + j] = {lambda_g_grid[i], lambda_beta_grid[j]};

    // First pass from the linear initialization (shared per lambda_beta).
    std::vector<std::optional<InitPair>> col_init(nb);
    for (int j = 0; j < nb; ++j) {
        try {
            col_init[j] = init_linear_impl(ev, lambda_beta_grid[j]);
        } catch (const std::exception&) {
            col_init[j] = std::nullopt;
        }
    }
    for (int i = 0; i < ng; ++i) {
        for (int j = 0; j < nb; ++j) {
            const std::size_t cell = static_cast<std::size_t>(i) * nb + j;
            if (!col_init[j]) {
                grid.failures[cell] = "initialization failed";
                continue;
            }
            try {
                grid.fits[cell] =
                    fit_with_evaluator(ev, lambda_g_grid[i], lambda_beta_grid[j], col_init[j], opts);
            } catch (const std::exception& exc) {
                grid.failures[cell] = exc.what();
            }
        }
    }

    // Neighbor-seeded sweeps until the best objectives stabilize.
    for (int sweep = 1; sweep <= opts.max_warm_sweeps; ++sweep) {
        grid.n_sweeps = sweep;
        double max_rel = 0.0;
        for (int i = 0; i < ng; ++i) {
            for (int j = 0; j < nb; ++j) {
                const std::size_t cell = static_cast<std::size_t>(i) * nb + j;
                for (int di = -1; di <= 1; ++di) {
                    for (int dj = -1; dj <= 1; ++dj) {
                        if (di == 0 && dj == 0) continue;
                        const int ni = i + di, nj = j + dj;
                        if (ni < 0 || ni >= ng || nj < 0 || nj >= nb) continue;
                        const auto& nfit = grid.fits[static_cast<std::size_t>(ni) * nb + nj];
                        if (!nfit) continue;
                        InitPair seed{nfit->c, nfit->d};
                        try {
                            FsimFit refit = fit_with_evaluator(ev, lambda_g_grid[i],
                                                               lambda_beta_grid[j], seed, opts);
                            if (!grid.fits[cell]) {
                                grid.fits[cell] = std::move(refit);
                                grid.failures[cell].clear();
                                max_rel = std::max(max_rel, 1.0);
                            } else if (refit.objective < grid.fits[cell]->objective) {
                                const double old = grid.fits[cell]->objective;
                                const double rel =
                                    (old - refit.objective) / std::max(std::abs(old), 1e-12);
                                max_rel = std::max(max_rel, rel);
                                grid.fits[cell] = std::move(refit);
                            }
                        } catch (const std::exception&) {
                            // keep the existing state; a failed refit never degrades a cell
                        }
                    }
                }
            }
        }
        if (max_rel < 0.01) break;
    }

    // Pin sigma-hat at the GCV-selected cell and stamp it across the grid.
    grid.gcv_cell = -1;
    double best = 0.0;
    for (std::size_t cell = 0; cell < grid.fits.size(); ++cell) {
        if (!grid.fits[cell]) continue;
        const double score = grid.fits[cell]->gcv_value;
        if (!std::isfinite(score)) continue;
        if (grid.gcv_cell < 0 || score < best ||
            (score == best && static_cast<int>(cell) > grid.gcv_cell)) {
            best = score;
            grid.gcv_cell = static_cast<int>(cell);
        }
    }
    if (grid.gcv_cell < 0)
        throw SurfaceInvalidError("warm_start_grid: no cell produced a usable fit");
    grid.sigma_gcv = grid.fits[grid.gcv_cell]->sigma_hat;
    for (auto& f : grid.fits)
        if (f) f->sigma_hat = grid.sigma_gcv;
    return grid;
}

namespace detail {

Linearization linearize(const FsimFit& fit) {
    const Index n = fit.index.size();
    Vector s(n);
    for (Index i = 0; i < n; ++i)
        s[i] = std::clamp(fit.index[i], -fit.s_range, fit.s_range);
    Linearization lin;
    lin.zg = eval_basis(fit.g_basis, s, 0);
    const Matrix phi1 = eval_basis(fit.g_basis, s, 1);
    lin.zb = (phi1 * fit.d).asDiagonal() * fit.Psi;

    const Matrix pg = penalty_matrix(fit.g_basis, 2);
    const Matrix pb = penalty_matrix(fit.beta_basis, 2);
    const Index k1 = lin.zg.cols(), k2 = lin.zb.cols();
    Matrix z(n, k1 + k2);
    z << lin.zg, lin.zb;
    lin.h = z.transpose() * z;
    lin.h.topLeftCorner(k1, k1) += fit.lambda_g * pg;
    lin.h.bottomRightCorner(k2, k2) += fit.lambda_beta * pb;
    return lin;
}

SmootherTraces smoother_traces(const Matrix& zg, const Matrix& zb, const Matrix& pg,
                               const Matrix& pb, double lambda_g, double lambda_beta) {
    const Index k1 = zg.cols(), k2 = zb.cols();
    Matrix z(zg.rows(), k1 + k2);
    z << zg, zb;
    const Matrix ztz = z.transpose() * z;
    Matrix h = ztz;
    if (k1 > 0) h.topLeftCorner(k1, k1) += lambda_g * pg;
    if (k2 > 0) h.bottomRightCorner(k2, k2) += lambda_beta * pb;
    SpdSolver solver(h);
    const Matrix b = solver.solve(ztz);
    SmootherTraces tr;
    tr.tr_s = b.trace();
    tr.tr_ss = (b.array() * b.transpose().array()).sum();
    return tr;
}

Matrix smoother_dense(const Matrix& zg, const Matrix& zb, const Matrix& pg, const Matrix& pb,
                      double lambda_g, double lambda_beta) {
    const Index k1 = zg.cols(), k2 = zb.cols();
    Matrix z(zg.rows(), k1 + k2);
    z << zg, zb;
    Matrix h = z.transpose() * z;
    if (k1 > 0) h.topLeftCorner(k1, k1) += lambda_g * pg;
    if (k2 > 0) h.bottomRightCorner(k2, k2) += lambda_beta * pb;
    SpdSolver solver(h);
    Matrix s = z * solver.solve(Matrix(z.transpose()));
    return 0.5 * (s + s.transpose());
}

}  // namespace detail

Matrix coef_covariance(const FsimFit& fit) {
    const auto lin = detail::linearize(fit);
    const Index k1 = lin.zg.cols(), k2 = lin.zb.cols();
    Matrix z(lin.zg.rows(), k1 + k2);
    z << lin.zg, lin.zb;
    SpdSolver solver(lin.h);
    const Matrix hinv_zt = solver.solve(Matrix(z.transpose()));  // H^-1 Z'
    Matrix cov = fit.sigma_hat * fit.sigma_hat * (hinv_zt * hinv_zt.transpose());
    return 0.5 * (cov + cov.transpose());
}

Matrix fsim_smoother_matrix(const FsimFit& fit) {
    const auto lin = detail::linearize(fit);
    const Matrix pg = penalty_matrix(fit.g_basis, 2);
    const Matrix pb = penalty_matrix(fit.beta_basis, 2);
    return detail::smoother_dense(lin.zg, lin.zb, pg, pb, fit.lambda_g, fit.lambda_beta);
}

namespace {

detail::SmootherTraces fit_traces(const FsimFit& fit) {
    const auto lin = detail::linearize(fit);
    const Matrix pg = penalty_matrix(fit.g_basis, 2);
    const Matrix pb = penalty_matrix(fit.beta_basis, 2);
    return detail::smoother_traces(lin.zg, lin.zb, pg, pb, fit.lambda_g, fit.lambda_beta);
}

}  // namespace

double fsim_gcv(const FsimFit& fit) {
    const double n = static_cast<double>(fit.index.size());
    const auto tr = fit_traces(fit);
    const double denom = n - tr.tr_s;
    if (!(denom > 0.0))
        throw DegenerateSmootherError("fsim_gcv: tr(S) >= n");
    return n * fit.rss / (denom * denom);
}

double fsim_sigma_hat(const FsimFit& fit) {
    const double n = static_cast<double>(fit.index.size());
    const auto tr = fit_traces(fit);
    const double df_res = n - 2.0 * tr.tr_s + tr.tr_ss;
    if (!(df_res > 0.0))
        throw DegenerateSmootherError("fsim_sigma_hat: residual degrees of freedom <= 0");
    return std::sqrt(fit.rss / df_res);
}

}  // namespace jenseff
