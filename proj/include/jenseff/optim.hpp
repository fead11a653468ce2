#pragma once

#include "jenseff/errors.hpp"
#include "jenseff/types.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace jenseff {

struct BfgsOptions {
    double rel_obj_tol = 1e-10;  // stop when f_prev - f <= tol * (1 + |f_prev|)
    double grad_tol = 1e-8;      // stop when ||g|| <= tol * (1 + |f|)
    int max_iterations = 2000;
};

struct BfgsResult {
    Vector x;
    double f = 0.0;
    Vector grad;
    int iterations = 0;
    bool converged = false;
};

/// Error carrying the last finite iterate when the objective turns non-finite.
struct NumericFailureError : std::runtime_error {
    NumericFailureError(const std::string& msg, Vector iterate, double value)
        : std::runtime_error(msg), last_iterate(std::move(iterate)), last_value(value) {}
    Vector last_iterate;
    double last_value = 0.0;
};

/// Objective callback: fills grad, returns the value.
using ObjectiveFn = std::function<double(const Vector&, Vector&)>;

namespace detail {

/// Strong-Wolfe line search along p from x (bracket + bisection zoom,
/// Nocedal & Wright alg. 3.5/3.6). On success returns alpha > 0 and leaves
/// (x_out, f_out, g_out) at the accepted point; non-finite trial values are
/// treated as sufficient-decrease failures so the search backs off them.
/// Returns 0 when no acceptable step exists (converged to precision).
inline double wolfe_line_search(const ObjectiveFn& fg, const Vector& x, double f0,
                                const Vector& p, double dphi0, Vector& x_out, double& f_out,
                                Vector& g_out) {
    constexpr double c1 = 1e-4, c2 = 0.9;
    const double neg_c2_dphi0 = -c2 * dphi0;

    auto phi = [&](double a) {
        x_out = x + a * p;
        f_out = fg(x_out, g_out);
        return f_out;
    };
    auto armijo_ok = [&](double a, double fa) {
        return std::isfinite(fa) && fa <= f0 + c1 * a * dphi0;
    };

    // zoom keeps [a_lo, a_hi] with a_lo the best Armijo point so far.
    auto zoom = [&](double a_lo, double f_lo, double a_hi) -> double {
        for (int j = 0; j < 50; ++j) {
            const double a = 0.5 * (a_lo + a_hi);
            const double fa = phi(a);
            if (!armijo_ok(a, fa) || fa >= f_lo) {
                a_hi = a;
            } else {
                const double dphi = g_out.dot(p);
                if (std::abs(dphi) <= neg_c2_dphi0) return a;
                if (dphi * (a_hi - a_lo) >= 0.0) a_hi = a_lo;
                a_lo = a;
                f_lo = fa;
            }
            if (std::abs(a_hi - a_lo) <= 1e-14 * std::max(1.0, std::abs(a_lo))) break;
        }
        if (a_lo > 0.0) {
            phi(a_lo);  // re-evaluate so outputs match the returned step
            return a_lo;
        }
        return 0.0;
    };

    double a_prev = 0.0, f_prev = f0;
    double a = 1.0;
    for (int i = 0; i < 30; ++i) {
        const double fa = phi(a);
        if (!armijo_ok(a, fa) || (i > 0 && fa >= f_prev))
            return zoom(a_prev, f_prev, a);
        const double dphi = g_out.dot(p);
        if (std::abs(dphi) <= neg_c2_dphi0) return a;
        if (dphi >= 0.0) return zoom(a, fa, a_prev);
        a_prev = a;
        f_prev = fa;
        a *= 2.0;
    }
    // Never bracketed: the last trial satisfied Armijo with descent; take it.
    phi(a_prev);
    return a_prev;
}

}  // namespace detail

/// Dense BFGS on the inverse Hessian approximation with a strong-Wolfe line
/// search. The update is skipped when the curvature condition s'y > 0 fails
/// numerically; accepted steps never increase the objective.
inline BfgsResult bfgs_minimize(const ObjectiveFn& fg, Vector x0, const BfgsOptions& opt = {}) {
    const Index dim = x0.size();

    Vector x = std::move(x0);
    Vector g(dim);
    double f = fg(x, g);
    if (!std::isfinite(f))
        throw NumericFailureError("bfgs_minimize: objective non-finite at start", x, f);

    Matrix hinv = Matrix::Identity(dim, dim);
    bool first_update = true;

    BfgsResult res;
    Vector x_new(dim), g_new(dim);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        if (g.norm() <= opt.grad_tol * (1.0 + std::abs(f))) {
            res.converged = true;
            break;
        }

        Vector p = -(hinv * g);
        double dphi0 = g.dot(p);
        if (!(dphi0 < 0.0)) {  // numerical breakdown of H: steepest-descent reset
            hinv.setIdentity();
            first_update = true;
            p = -g;
            dphi0 = g.dot(p);
            if (!(dphi0 < 0.0)) {
                res.converged = true;
                break;
            }
        }

        double f_new = f;
        const double alpha =
            detail::wolfe_line_search(fg, x, f, p, dphi0, x_new, f_new, g_new);
        if (alpha <= 0.0 || !(f_new < f)) {
            res.converged = true;  // no further decrease possible along any scale
            break;
        }

        const Vector s = x_new - x;
        const Vector yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-10 * s.norm() * yv.norm()) {
            if (first_update) {
                hinv *= sy / yv.squaredNorm();
                first_update = false;
            }
            const double rho = 1.0 / sy;
            const Vector hy = hinv * yv;
            const double yhy = yv.dot(hy);
            hinv.noalias() += ((sy + yhy) * rho * rho) * (s * s.transpose());
            hinv.noalias() -= rho * (hy * s.transpose() + s * hy.transpose());
        }

        const double f_old = f;
        x = x_new;
        f = f_new;
        g = g_new;
        res.iterations = iter + 1;

        if (f_old - f <= opt.rel_obj_tol * (1.0 + std::abs(f_old))) {
            res.converged = true;
            break;
        }
    }

    res.x = std::move(x);
    res.f = f;
    res.grad = std::move(g);
    return res;
}

}  // namespace jenseff
