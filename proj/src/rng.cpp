#include "fedpvr/rng.hpp"

#include <cmath>
#include <numbers>

#include "fedpvr/common.hpp"

namespace fedpvr {

namespace {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

RngStream RngStream::keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ (a + 0xA0761D6478BD642Full));
    k = mix64(k ^ (b + 0xE7037ED1A0B428DBull));
    k = mix64(k ^ (c + 0x8EBC6AF09C88C6E3ull));
    return RngStream(k);
}

std::uint64_t RngStream::next_u64() { return mix64(key_ ^ mix64(counter_++)); }

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
    if (bound == 0) throw Error("next_below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return r % bound;
}

double RngStream::next_gaussian() {
    if (has_spare_gaussian_) {
        has_spare_gaussian_ = false;
        return spare_gaussian_;
    }
    // Box-Muller; u clamped away from 0 so log stays finite.
    double u = next_double();
    if (u <= 0.0) u = 0x1.0p-53;
    const double v = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u));
    const double angle = 2.0 * std::numbers::pi * v;
    spare_gaussian_ = radius * std::sin(angle);
    has_spare_gaussian_ = true;
    return radius * std::cos(angle);
}

double RngStream::next_gamma(double alpha) {
    if (!(alpha > 0.0)) throw Error("next_gamma: alpha must be > 0");
    if (alpha < 1.0) {
        // Boost to alpha+1 and scale back.
        double u = next_double();
        if (u <= 0.0) u = 0x1.0p-53;
        return next_gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = next_gaussian();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
            return d * v;
    }
}

void RngStream::dirichlet(double alpha, std::span<double> out) {
    double total = 0.0;
    for (double& o : out) {
        o = next_gamma(alpha);
        total += o;
    }
    if (total <= 0.0) {
        // All gammas underflowed (tiny alpha): fall back to a single winner.
        const std::size_t w = static_cast<std::size_t>(next_below(out.size()));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (i == w) ? 1.0 : 0.0;
        return;
    }
    for (double& o : out) o /= total;
}

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n,
                                                               std::size_t k) {
    if (k > n) throw Error("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates: first k slots become the sample.
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace fedpvr
