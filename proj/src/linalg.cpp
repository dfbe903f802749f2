#include "fedpvr/linalg.hpp"

#include <cmath>

#include "fedpvr/rng.hpp"

namespace fedpvr::linalg {

std::vector<double> cholesky_solve(const Matrix& a, const std::vector<double>& b) {
    const std::size_t d = a.rows;
    if (a.cols != d) throw Error("cholesky_solve: matrix not square");
    if (b.size() != d) throw Error("cholesky_solve: rhs dimension mismatch");

    // Lower-triangular factor, in place on a copy.
    Matrix l(d, d);
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(a.at(i, i)));
    const double pivot_tol = 1e-14 * std::max(scale, 1.0);

    for (std::size_t j = 0; j < d; ++j) {
        double diag = a.at(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l.at(j, k) * l.at(j, k);
        if (diag <= pivot_tol)
            throw Error("cholesky_solve: matrix is singular or indefinite (pivot " +
                        std::to_string(j) + " = " + std::to_string(diag) + ")");
        l.at(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            l.at(i, j) = s / l.at(j, j);
        }
    }

    // Forward then back substitution.
    std::vector<double> y(d), x(d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
        y[i] = s / l.at(i, i);
    }
    for (std::size_t ii = d; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < d; ++k) s -= l.at(k, ii) * x[k];
        x[ii] = s / l.at(ii, ii);
    }
    return x;
}

double power_iteration_lmax(const MatVec& apply, std::size_t dim, double tol,
                            std::size_t max_iters) {
    if (dim == 0) throw Error("power_iteration_lmax: empty operator");
    RngStream rng = RngStream::keyed(0xB0B5EED);
    std::vector<double> v(dim), av(dim);
    for (auto& x : v) x = rng.next_gaussian();

    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        apply(v.data(), av.data());
        double vav = 0.0, vv = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            vav += v[i] * av[i];
            vv += v[i] * v[i];
            norm += av[i] * av[i];
        }
        const double next = (vv > 0.0) ? vav / vv : 0.0;
        norm = std::sqrt(norm);
        if (norm <= 1e-300) return 0.0;  // operator annihilates the iterate
        for (std::size_t i = 0; i < dim; ++i) v[i] = av[i] / norm;
        if (it > 0 && std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next)))
            return next;
        lambda = next;
    }
    return lambda;
}

Extremes symmetric_extremes(const MatVec& apply, std::size_t dim, double tol) {
    const double lmax = power_iteration_lmax(apply, dim, tol);
    // lambda_min(A) = lmax - lambda_max(lmax*I - A) for PSD A.
    const double shift = lmax;
    MatVec shifted = [&](const double* in, double* out) {
        apply(in, out);
        for (std::size_t i = 0; i < dim; ++i) out[i] = shift * in[i] - out[i];
    };
    const double top_of_shifted = power_iteration_lmax(shifted, dim, tol);
    double lmin = shift - top_of_shifted;
    if (lmin < 0.0 && lmin > -tol * std::max(1.0, lmax)) lmin = 0.0;
    return {lmax, lmin};
}

}  // namespace fedpvr::linalg
