#include <doctest.h>

#include <cstring>
#include <vector>

#include "fedpvr/kernels.hpp"
#include "fedpvr/rng.hpp"

using namespace fedpvr;

namespace {

std::vector<double> random_vec(std::size_t n, RngStream& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_gaussian() * 3.0;
    return v;
}

std::vector<std::uint8_t> random_bits(std::size_t n, RngStream& rng) {
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_below(2));
    return bits;
}

const std::vector<std::size_t> kLengths = {0, 1, 2, 3, 4, 5, 7, 8,
                                           15, 16, 17, 33, 100, 1001};

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("every available backend matches the scalar reference bit for bit") {
    const auto& ref = kernels::table(kernels::Backend::Scalar);
    for (auto backend : kernels::available_backends()) {
        if (backend == kernels::Backend::Scalar) continue;
        const auto& ops = kernels::table(backend);
        CAPTURE(kernels::backend_name(backend));

        RngStream rng = RngStream::keyed(42, static_cast<std::uint64_t>(backend));
        for (std::size_t n : kLengths) {
            auto x = random_vec(n, rng);
            auto y = random_vec(n, rng);
            auto bits = random_bits(n, rng);

            // Reductions: identical lane order means identical bits.
            const double d_ref = ref.dot(x.data(), y.data(), n);
            const double d_simd = ops.dot(x.data(), y.data(), n);
            CHECK(std::memcmp(&d_ref, &d_simd, sizeof(double)) == 0);
            const double n_ref = ref.norm_sq(x.data(), n);
            const double n_simd = ops.norm_sq(x.data(), n);
            CHECK(std::memcmp(&n_ref, &n_simd, sizeof(double)) == 0);

            auto ya = y, yb = y;
            ref.axpy(0.7, x.data(), ya.data(), n);
            ops.axpy(0.7, x.data(), yb.data(), n);
            CHECK(bitwise_equal(ya, yb));

            ya = y; yb = y;
            ref.axpby(1.3, x.data(), -0.4, ya.data(), n);
            ops.axpby(1.3, x.data(), -0.4, yb.data(), n);
            CHECK(bitwise_equal(ya, yb));

            ya = y; yb = y;
            ref.scal(-2.5, ya.data(), n);
            ops.scal(-2.5, yb.data(), n);
            CHECK(bitwise_equal(ya, yb));

            std::vector<double> oa(n), ob(n);
            ref.sub(x.data(), y.data(), oa.data(), n);
            ops.sub(x.data(), y.data(), ob.data(), n);
            CHECK(bitwise_equal(oa, ob));
            ref.add(x.data(), y.data(), oa.data(), n);
            ops.add(x.data(), y.data(), ob.data(), n);
            CHECK(bitwise_equal(oa, ob));

            ref.masked_copy(bits.data(), x.data(), oa.data(), n);
            ops.masked_copy(bits.data(), x.data(), ob.data(), n);
            CHECK(bitwise_equal(oa, ob));
            ref.blend(bits.data(), x.data(), y.data(), oa.data(), n);
            ops.blend(bits.data(), x.data(), y.data(), ob.data(), n);
            CHECK(bitwise_equal(oa, ob));

            auto ci = random_vec(n, rng);
            auto c = random_vec(n, rng);
            ya = y; yb = y;
            ref.step_vr(0.05, x.data(), ci.data(), c.data(), ya.data(), n);
            ops.step_vr(0.05, x.data(), ci.data(), c.data(), yb.data(), n);
            CHECK(bitwise_equal(ya, yb));
        }
    }
}

TEST_CASE("kernel semantics against naive loops") {
    RngStream rng = RngStream::keyed(7);
    const auto& ops = kernels::active();
    for (std::size_t n : kLengths) {
        auto x = random_vec(n, rng);
        auto y = random_vec(n, rng);

        double naive = 0.0;
        for (std::size_t i = 0; i < n; ++i) naive += x[i] * y[i];
        CHECK(ops.dot(x.data(), y.data(), n) ==
              doctest::Approx(naive).epsilon(1e-12));

        auto yy = y;
        ops.axpy(2.0, x.data(), yy.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(yy[i] == y[i] + 2.0 * x[i]);

        auto bits = random_bits(n, rng);
        std::vector<double> out(n);
        ops.masked_copy(bits.data(), x.data(), out.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(out[i] == (bits[i] ? x[i] : 0.0));

        std::vector<double> ci = random_vec(n, rng), c = random_vec(n, rng);
        yy = y;
        ops.step_vr(0.1, x.data(), ci.data(), c.data(), yy.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(yy[i] == y[i] - 0.1 * ((x[i] - ci[i]) + c[i]));
    }
}

TEST_CASE("backend selection") {
    const auto backends = kernels::available_backends();
    REQUIRE(!backends.empty());
    CHECK(backends.front() == kernels::Backend::Scalar);
    const auto before = kernels::active_backend();
    for (auto b : backends) {
        CHECK(kernels::set_backend(b));
        CHECK(kernels::active_backend() == b);
    }
    kernels::set_backend(before);
#if !defined(__aarch64__)
    CHECK_FALSE(kernels::set_backend(kernels::Backend::Neon));
#endif
}
