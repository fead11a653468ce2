#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace jenseff {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;
using Eigen::Index;

/// Closed interval [a, b] on the real line.
struct Interval {
    double a = 0.0;
    double b = 1.0;

    double length() const { return b - a; }
    bool contains(double x) const { return x >= a && x <= b; }

    void require_nondegenerate(const char* what) const {
        if (!(a < b))
            throw std::invalid_argument(std::string(what) + ": degenerate interval");
    }
};

inline bool same_interval(const Interval& u, const Interval& v, double tol = 1e-12) {
    return std::abs(u.a - v.a) <= tol && std::abs(u.b - v.b) <= tol;
}

/// Uniform log10-spaced grid, inclusive of both endpoints.
inline Vector log10_grid(double lo_exp, double hi_exp, int n) {
    if (n < 1) throw std::invalid_argument("log10_grid: n must be >= 1");
    Vector g(n);
    if (n == 1) {
        g[0] = std::pow(10.0, lo_exp);
        return g;
    }
    for (int i = 0; i < n; ++i)
        g[i] = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * i / (n - 1));
    return g;
}

}  // namespace jenseff
