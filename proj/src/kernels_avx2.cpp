#include "fedpvr/kernels.hpp"

// AVX2 variants. Built with -mavx2 only (no -mfma): mul+add must round like
// the scalar reference. Reductions keep the canonical 4-lane order.

#include <immintrin.h>

namespace fedpvr::kernels::avx2 {

namespace {

inline __m256d load_mask(const std::uint8_t* bits) {
    return _mm256_castsi256_pd(_mm256_set_epi64x(
        -static_cast<long long>(bits[3]), -static_cast<long long>(bits[2]),
        -static_cast<long long>(bits[1]), -static_cast<long long>(bits[0])));
}

}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (; i < n; ++i) lane[i & 3] += x[i] * y[i];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double norm_sq(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void axpby(double a, const double* x, double b, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        __m256d vy = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(vx, vy));
    }
    for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void scal(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] = a * x[i];
}

void sub(const double* x, const double* y, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] - y[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

void masked_copy(const std::uint8_t* bits, const double* x, double* out,
                 std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d m = load_mask(bits + i);
        _mm256_storeu_pd(out + i,
                         _mm256_blendv_pd(zero, _mm256_loadu_pd(x + i), m));
    }
    for (; i < n; ++i) out[i] = bits[i] ? x[i] : 0.0;
}

void blend(const std::uint8_t* bits, const double* a, const double* b,
           double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d m = load_mask(bits + i);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_loadu_pd(b + i),
                                                   _mm256_loadu_pd(a + i), m));
    }
    for (; i < n; ++i) out[i] = bits[i] ? a[i] : b[i];
}

void step_vr(double eta, const double* g, const double* ci, const double* c,
             double* y, std::size_t n) {
    const __m256d ve = _mm256_set1_pd(eta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d corr = _mm256_add_pd(
            _mm256_sub_pd(_mm256_loadu_pd(g + i), _mm256_loadu_pd(ci + i)),
            _mm256_loadu_pd(c + i));
        __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_sub_pd(vy, _mm256_mul_pd(ve, corr)));
    }
    for (; i < n; ++i) y[i] = y[i] - eta * ((g[i] - ci[i]) + c[i]);
}

}  // namespace fedpvr::kernels::avx2

namespace fedpvr::kernels {

const Ops& avx2_table() {
    static const Ops ops = {
        avx2::dot,  avx2::norm_sq,     avx2::axpy,  avx2::axpby,
        avx2::scal, avx2::sub,         avx2::add,   avx2::masked_copy,
        avx2::blend, avx2::step_vr,
    };
    return ops;
}

}  // namespace fedpvr::kernels
