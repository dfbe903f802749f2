#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

// Double-precision array kernels with a scalar reference implementation and
// SIMD variants selected at runtime. Every backend is bit-identical:
//
//   * elementwise kernels evaluate the same IEEE expression per element
//     (no fused multiply-add; translation units are built with
//     -ffp-contract=off),
//   * reductions accumulate into four lanes by index mod 4 and combine as
//     (l0 + l1) + (l2 + l3), the order a 4-wide vector register reduces in.
//
// The canonical lane order makes scalar/AVX2/NEON results byte-equal, which
// the equivalence tests assert and the reproducibility contract relies on.

namespace fedpvr::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct Ops {
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*norm_sq)(const double* x, std::size_t n);
    // y += a*x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = a*x + b*y
    void (*axpby)(double a, const double* x, double b, double* y, std::size_t n);
    void (*scal)(double a, double* x, std::size_t n);
    // out = x - y
    void (*sub)(const double* x, const double* y, double* out, std::size_t n);
    void (*add)(const double* x, const double* y, double* out, std::size_t n);
    // out = bits ? x : 0
    void (*masked_copy)(const std::uint8_t* bits, const double* x, double* out,
                        std::size_t n);
    // out = bits ? a : b
    void (*blend)(const std::uint8_t* bits, const double* a, const double* b,
                  double* out, std::size_t n);
    // y -= eta * (g - ci + c); the client-update hot loop
    void (*step_vr)(double eta, const double* g, const double* ci,
                    const double* c, double* y, std::size_t n);
};

const char* backend_name(Backend b);
std::vector<Backend> available_backends();

/// Active dispatch table. Resolved on first use: FEDPVR_KERNELS environment
/// variable (scalar|avx2|neon) if set, otherwise the widest available backend.
const Ops& active();
Backend active_backend();

/// Force a backend (tests). Returns false if unavailable on this machine.
bool set_backend(Backend b);

/// Table for an explicit backend; throws if unavailable.
const Ops& table(Backend b);

}  // namespace fedpvr::kernels
