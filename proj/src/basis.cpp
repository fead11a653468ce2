#include "jenseff/basis.hpp"
#include "jenseff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace jenseff {

BasisSystem make_bspline_basis(Interval domain, int n_basis, int order) {
    domain.require_nondegenerate("make_bspline_basis");
    if (order < 1)
        throw std::invalid_argument("make_bspline_basis: order must be >= 1");
    if (n_basis < order)
        throw std::invalid_argument("make_bspline_basis: n_basis must be >= order");

    const int n_interior = n_basis - order;
    Vector knots(n_basis + order);
    for (int i = 0; i < order; ++i) knots[i] = domain.a;
    for (int i = 0; i < n_interior; ++i)
        knots[order + i] = domain.a + domain.length() * (i + 1) / (n_interior + 1);
    for (int i = 0; i < order; ++i) knots[n_basis + i] = domain.b;

    BasisSystem b;
    b.kind = BasisKind::bspline;
    b.domain = domain;
    b.n_basis = n_basis;
    b.order = order;
    b.knots = std::move(knots);
    return b;
}

BasisSystem make_fourier_basis(Interval domain, int n_basis) {
    domain.require_nondegenerate("make_fourier_basis");
    if (n_basis < 1)
        throw std::invalid_argument("make_fourier_basis: n_basis must be >= 1");
    BasisSystem b;
    b.kind = BasisKind::fourier;
    b.domain = domain;
    b.n_basis = n_basis;
    b.order = 0;
    return b;
}

namespace {

void check_in_domain(const BasisSystem& b, double x) {
    if (!b.domain.contains(x)) {
        std::ostringstream os;
        os << "eval_basis: point " << x << " outside domain [" << b.domain.a << ", "
           << b.domain.b << "]";
        throw OutOfDomainError(os.str());
    }
}

int find_span(const BasisSystem& b, double x) {
    // span i: knots[i] <= x < knots[i+1]; x == b maps to the last span.
    const int k = b.order;
    const int n = b.n_basis;
    if (x >= b.knots[n]) return n - 1;
    const double* lo = b.knots.data() + (k - 1);
    const double* hi = b.knots.data() + (n + 1);
    return static_cast<int>(std::upper_bound(lo, hi, x) - b.knots.data()) - 1;
}

// Fourier basis function j, deriv-th derivative at x; derivatives via the
// phase-shift identity sin'(wu) = w sin(wu + pi/2).
double fourier_eval(const BasisSystem& b, int j, double x, int deriv) {
    const double T = b.domain.length();
    if (j == 0) return deriv == 0 ? 1.0 / std::sqrt(T) : 0.0;
    const int freq = (j + 1) / 2;
    const double omega = 2.0 * M_PI * freq / T;
    const double u = (x - b.domain.a) * omega + deriv * M_PI / 2.0;
    const double amp = std::sqrt(2.0 / T) * std::pow(omega, deriv);
    return (j % 2 == 1) ? amp * std::sin(u) : amp * std::cos(u);
}

}  // namespace

int eval_bspline_span(const BasisSystem& b, double x, int max_deriv, Matrix& ders) {
    // Cox-de Boor with derivatives (The NURBS Book, A2.3).
    const int k = b.order;
    const int p = k - 1;
    const Vector& U = b.knots;
    const int span = find_span(b, x);

    Matrix ndu(k, k);
    Vector left(k), right(k);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - U[span + 1 - j];
        right[j] = U[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }

    ders.resize(max_deriv + 1, k);
    ders.setZero();
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

    if (max_deriv > 0) {
        Matrix a(2, k);
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            a(0, 0) = 1.0;
            for (int d = 1; d <= max_deriv && d <= p; ++d) {
                double acc = 0.0;
                const int rk = r - d, pk = p - d;
                if (r >= d) {
                    a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                    acc = a(s2, 0) * ndu(rk, pk);
                }
                const int j1 = (rk >= -1) ? 1 : -rk;
                const int j2 = (r - 1 <= pk) ? d - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                    acc += a(s2, j) * ndu(rk + j, pk);
                }
                if (r <= pk) {
                    a(s2, d) = -a(s1, d - 1) / ndu(pk + 1, r);
                    acc += a(s2, d) * ndu(r, pk);
                }
                ders(d, r) = acc;
                std::swap(s1, s2);
            }
        }
        double factor = p;
        for (int d = 1; d <= max_deriv; ++d) {
            if (d <= p)
                for (int j = 0; j <= p; ++j) ders(d, j) *= factor;
            factor *= (p - d);
        }
    }
    return span - p;
}

Matrix eval_basis(const BasisSystem& b, const Vector& points, int deriv) {
    if (deriv < 0) throw std::invalid_argument("eval_basis: deriv must be >= 0");
    if (b.kind == BasisKind::bspline && deriv >= b.order)
        throw std::invalid_argument("eval_basis: deriv must be < order for B-splines");

    Matrix out = Matrix::Zero(points.size(), b.n_basis);
    if (b.kind == BasisKind::bspline) {
        Matrix ders;
        for (Index i = 0; i < points.size(); ++i) {
            check_in_domain(b, points[i]);
            const int first = eval_bspline_span(b, points[i], deriv, ders);
            for (int j = 0; j < b.order; ++j) out(i, first + j) = ders(deriv, j);
        }
    } else {
        for (Index i = 0; i < points.size(); ++i) {
            check_in_domain(b, points[i]);
            for (int j = 0; j < b.n_basis; ++j) out(i, j) = fourier_eval(b, j, points[i], deriv);
        }
    }
    return out;
}

RowVector eval_basis_at(const BasisSystem& b, double x, int deriv) {
    Vector p(1);
    p[0] = x;
    return eval_basis(b, p, deriv).row(0);
}

namespace detail {

void gauss_legendre(int n, Vector& nodes, Vector& weights) {
    static std::map<int, std::pair<Vector, Vector>> cache;
    static std::mutex mtx;
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(n);
        if (it != cache.end()) {
            nodes = it->second.first;
            weights = it->second.second;
            return;
        }
    }
    nodes.resize(n);
    weights.resize(n);
    // Newton iteration on Legendre polynomials, symmetric roots.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    std::lock_guard<std::mutex> lock(mtx);
    cache.emplace(n, std::make_pair(nodes, weights));
}

}  // namespace detail

namespace {

// Breakpoints for composite quadrature: unique spline knots, or a uniform
// subdivision fine enough for the highest Fourier frequency present.
std::vector<double> quad_breakpoints(const BasisSystem& a, const BasisSystem& b) {
    std::vector<double> pts;
    const bool any_fourier = a.kind == BasisKind::fourier || b.kind == BasisKind::fourier;
    if (any_fourier) {
        int max_freq = 1;
        if (a.kind == BasisKind::fourier) max_freq = std::max(max_freq, a.n_basis / 2);
        if (b.kind == BasisKind::fourier) max_freq = std::max(max_freq, b.n_basis / 2);
        const int n_sub = std::max(32, 8 * max_freq);
        for (int i = 0; i <= n_sub; ++i)
            pts.push_back(a.domain.a + a.domain.length() * i / n_sub);
        for (const BasisSystem* s : {&a, &b})
            if (s->kind == BasisKind::bspline)
                for (Index i = 0; i < s->knots.size(); ++i) pts.push_back(s->knots[i]);
    } else {
        for (const BasisSystem* s : {&a, &b})
            for (Index i = 0; i < s->knots.size(); ++i) pts.push_back(s->knots[i]);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double u, double v) { return std::abs(u - v) < 1e-14; }),
              pts.end());
    return pts;
}

Matrix quadrature_gram(const BasisSystem& a, const BasisSystem& b, int deriv_a, int deriv_b,
                       int nodes_per_interval) {
    Vector gl_x, gl_w;
    detail::gauss_legendre(nodes_per_interval, gl_x, gl_w);
    const auto brk = quad_breakpoints(a, b);

    Matrix out = Matrix::Zero(a.n_basis, b.n_basis);
    Vector pt(1);
    for (std::size_t s = 0; s + 1 < brk.size(); ++s) {
        const double lo = brk[s], hi = brk[s + 1];
        if (hi - lo < 1e-14) continue;
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        for (int q = 0; q < nodes_per_interval; ++q) {
            pt[0] = mid + half * gl_x[q];
            const Matrix ra = eval_basis(a, pt, deriv_a);
            const Matrix rb = (&a == &b && deriv_a == deriv_b) ? ra : eval_basis(b, pt, deriv_b);
            out.noalias() += (half * gl_w[q]) * ra.transpose() * rb;
        }
    }
    return out;
}

}  // namespace

Matrix penalty_matrix(const BasisSystem& b, int deriv) {
    if (deriv < 0) throw std::invalid_argument("penalty_matrix: deriv must be >= 0");
    if (b.kind == BasisKind::bspline) {
        if (deriv >= b.order)
            throw std::invalid_argument("penalty_matrix: deriv must be < order");
        Matrix p = quadrature_gram(b, b, deriv, deriv, b.order);
        return 0.5 * (p + p.transpose());
    }
    // Orthonormal Fourier system: cross terms vanish over whole periods and
    // each d-th derivative has L2 norm omega^d, so the penalty is diagonal.
    Matrix p = Matrix::Zero(b.n_basis, b.n_basis);
    const double T = b.domain.length();
    for (int j = 0; j < b.n_basis; ++j) {
        if (j == 0) {
            p(0, 0) = deriv == 0 ? 1.0 : 0.0;
            continue;
        }
        const int freq = (j + 1) / 2;
        const double omega = 2.0 * M_PI * freq / T;
        p(j, j) = std::pow(omega, 2 * deriv);
    }
    return p;
}

Matrix inner_product_matrix(const BasisSystem& a, const BasisSystem& b) {
    if (!same_interval(a.domain, b.domain))
        throw std::invalid_argument("inner_product_matrix: domains differ");
    const int nodes = std::max({8, a.order + b.order});
    return quadrature_gram(a, b, 0, 0, nodes);
}

Vector greville_abscissae(const BasisSystem& b) {
    if (b.kind != BasisKind::bspline)
        throw std::invalid_argument("greville_abscissae: B-spline basis required");
    if (b.order < 2)
        throw std::invalid_argument("greville_abscissae: order must be >= 2");
    Vector g(b.n_basis);
    for (int j = 0; j < b.n_basis; ++j) {
        double sum = 0.0;
        for (int r = 1; r < b.order; ++r) sum += b.knots[j + r];
        g[j] = sum / (b.order - 1);
    }
    return g;
}

}  // namespace jenseff
