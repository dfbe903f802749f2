#pragma once

#include <functional>
#include <vector>

#include "fedpvr/common.hpp"

namespace fedpvr::linalg {

/// Solve A x = b for symmetric positive-definite A (row-major, d x d) by
/// Cholesky factorization. Throws Error naming the deficient pivot when A is
/// singular or indefinite.
std::vector<double> cholesky_solve(const Matrix& a, const std::vector<double>& b);

using MatVec = std::function<void(const double* in, double* out)>;

/// Largest eigenvalue of a symmetric PSD operator via power iteration with a
/// Rayleigh-quotient stopping rule (|change| <= tol * max(1, |lambda|)).
double power_iteration_lmax(const MatVec& apply, std::size_t dim,
                            double tol = 1e-12, std::size_t max_iters = 100000);

/// Extreme eigenvalues of a symmetric PSD operator. lambda_min is recovered
/// from a shifted power iteration on (lmax * I - A).
struct Extremes {
    double lambda_max;
    double lambda_min;
};
Extremes symmetric_extremes(const MatVec& apply, std::size_t dim,
                            double tol = 1e-12);

}  // namespace fedpvr::linalg
