#pragma once

#include "jenseff/errors.hpp"
#include "jenseff/types.hpp"

#include <Eigen/Cholesky>

namespace jenseff {

/// Pivoted LDLT of a symmetric positive-semidefinite matrix with escalating
/// jitter: if the factorization degenerates, add 1e-10 * mean(diag) to the
/// diagonal and escalate tenfold up to 1e-6 * mean(diag) before reporting the
/// system as ill-conditioned.
class SpdSolver {
public:
    explicit SpdSolver(const Matrix& m) {
        ldlt_.compute(m);
        if (usable()) return;
        const double mean_diag = m.diagonal().cwiseAbs().mean();
        if (!(mean_diag > 0.0))
            throw IllConditionedError("SpdSolver: zero or non-finite diagonal");
        for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
            jitter_ = rel * mean_diag;
            ldlt_.compute(m + jitter_ * Matrix::Identity(m.rows(), m.cols()));
            if (usable()) return;
        }
        throw IllConditionedError("SpdSolver: factorization failed after jitter escalation");
    }

    Vector solve(const Vector& b) const { return ldlt_.solve(b); }
    Matrix solve(const Matrix& b) const { return ldlt_.solve(b); }

    double jitter() const { return jitter_; }

private:
    bool usable() const {
        if (ldlt_.info() != Eigen::Success) return false;
        const Vector& d = ldlt_.vectorD();
        // near-zero or negative pivots mean the inverse would amplify noise
        // into the null directions; jitter instead
        return d.maxCoeff() > 0.0 && d.minCoeff() > 1e-13 * d.maxCoeff();
    }

    Eigen::LDLT<Matrix> ldlt_;
    double jitter_ = 0.0;
};

}  // namespace jenseff
