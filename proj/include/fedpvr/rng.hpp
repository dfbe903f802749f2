#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fedpvr {

/// Counter-based random stream. A stream is a pure function of its key and a
/// draw counter, so streams keyed by (seed, client, round) are independent of
/// execution order and cheap to reconstruct — the reproducibility contract
/// depends on exactly this.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    /// Derive a stream key by hashing up to four components.
    static RngStream keyed(std::uint64_t seed, std::uint64_t a = 0,
                           std::uint64_t b = 0, std::uint64_t c = 0);

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double();

    /// Uniform integer in [0, bound); rejection sampled, unbiased.
    std::uint64_t next_below(std::uint64_t bound);

    /// Standard normal (Box-Muller; caches the paired draw).
    double next_gaussian();

    /// Gamma(alpha, 1) via Marsaglia-Tsang; alpha > 0.
    double next_gamma(double alpha);

    /// Symmetric Dirichlet(alpha * 1) over out.size() components.
    void dirichlet(double alpha, std::span<double> out);

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// First k elements of a random permutation of [0, n): uniform sample
    /// without replacement.
    std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                        std::size_t k);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_gaussian_ = false;
    double spare_gaussian_ = 0.0;
};

}  // namespace fedpvr
