#include "fedpvr/kernels.hpp"

// NEON variants (aarch64). Two 2-lane registers emulate the canonical 4-lane
// reduction; vmul+vadd are kept separate so rounding matches the scalar
// reference (vmla would fuse).

#include <arm_neon.h>

namespace fedpvr::kernels::neon {

namespace {

inline float64x2_t mask2(const std::uint8_t* bits) {
    std::uint64_t m[2] = {bits[0] ? ~0ull : 0ull, bits[1] ? ~0ull : 0ull};
    return vreinterpretq_f64_u64(vld1q_u64(m));
}

}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
        acc23 = vaddq_f64(acc23,
                          vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
    }
    double lane[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                      vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (; i < n; ++i) lane[i & 3] += x[i] * y[i];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double norm_sq(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t t = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), t));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void axpby(double a, const double* x, double b, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t tx = vmulq_f64(va, vld1q_f64(x + i));
        float64x2_t ty = vmulq_f64(vb, vld1q_f64(y + i));
        vst1q_f64(y + i, vaddq_f64(tx, ty));
    }
    for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void scal(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] = a * x[i];
}

void sub(const double* x, const double* y, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) out[i] = x[i] - y[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

void masked_copy(const std::uint8_t* bits, const double* x, double* out,
                 std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vbslq_f64(vreinterpretq_u64_f64(mask2(bits + i)),
                                     vld1q_f64(x + i), zero));
    for (; i < n; ++i) out[i] = bits[i] ? x[i] : 0.0;
}

void blend(const std::uint8_t* bits, const double* a, const double* b,
           double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vbslq_f64(vreinterpretq_u64_f64(mask2(bits + i)),
                                     vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = bits[i] ? a[i] : b[i];
}

void step_vr(double eta, const double* g, const double* ci, const double* c,
             double* y, std::size_t n) {
    const float64x2_t ve = vdupq_n_f64(eta);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t corr = vaddq_f64(
            vsubq_f64(vld1q_f64(g + i), vld1q_f64(ci + i)), vld1q_f64(c + i));
        vst1q_f64(y + i, vsubq_f64(vld1q_f64(y + i), vmulq_f64(ve, corr)));
    }
    for (; i < n; ++i) y[i] = y[i] - eta * ((g[i] - ci[i]) + c[i]);
}

}  // namespace fedpvr::kernels::neon

namespace fedpvr::kernels {

const Ops& neon_table() {
    static const Ops ops = {
        neon::dot,  neon::norm_sq,     neon::axpy,  neon::axpby,
        neon::scal, neon::sub,         neon::add,   neon::masked_copy,
        neon::blend, neon::step_vr,
    };
    return ops;
}

}  // namespace fedpvr::kernels
