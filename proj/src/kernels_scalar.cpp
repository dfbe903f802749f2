#include "fedpvr/kernels.hpp"

// Reference kernels. Reductions use the canonical 4-lane order documented in
// kernels.hpp; everything else is a plain per-element loop.

namespace fedpvr::kernels::scalar {

double dot(const double* x, const double* y, std::size_t n) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) lane[i & 3] += x[i] * y[i];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double norm_sq(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void axpby(double a, const double* x, double b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void scal(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = a * x[i];
}

void sub(const double* x, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void masked_copy(const std::uint8_t* bits, const double* x, double* out,
                 std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = bits[i] ? x[i] : 0.0;
}

void blend(const std::uint8_t* bits, const double* a, const double* b,
           double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = bits[i] ? a[i] : b[i];
}

void step_vr(double eta, const double* g, const double* ci, const double* c,
             double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] - eta * ((g[i] - ci[i]) + c[i]);
}

}  // namespace fedpvr::kernels::scalar

namespace fedpvr::kernels {

const Ops& scalar_table() {
    static const Ops ops = {
        scalar::dot,  scalar::norm_sq,     scalar::axpy,  scalar::axpby,
        scalar::scal, scalar::sub,         scalar::add,   scalar::masked_copy,
        scalar::blend, scalar::step_vr,
    };
    return ops;
}

}  // namespace fedpvr::kernels
