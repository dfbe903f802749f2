#include <doctest.h>

#include <cstring>

#include "fedpvr/param_vector.hpp"
#include "fedpvr/rng.hpp"

using namespace fedpvr;

TEST_CASE("layer layout bookkeeping") {
    const auto layout = LayerLayout::from_sizes({{"a", 4}, {"b", 3}, {"c", 2}});
    CHECK(layout.total_dim() == 9);
    CHECK(layout.layer_count() == 3);
    CHECK(layout.layer(0).offset == 0);
    CHECK(layout.layer(1).offset == 4);
    CHECK(layout.layer(2).offset == 7);
    CHECK(layout.index_of("b") == 1);
    CHECK(!layout.index_of("missing"));
    CHECK_THROWS_AS(layout.layer(3), Error);
    CHECK_THROWS_AS(LayerLayout::from_sizes({{"a", 2}, {"a", 3}}), Error);
    CHECK_THROWS_AS(LayerLayout::from_sizes({{"a", 0}}), Error);
}

TEST_CASE("mask from layer cutoff") {
    const auto layout = LayerLayout::from_sizes({{"a", 4}, {"b", 3}, {"c", 2}});

    SUBCASE("interior cutoff selects the suffix") {
        const Mask m = Mask::from_layer_cutoff(layout, 2);
        CHECK(m.ones_count() == 2);
        const std::vector<std::uint8_t> expect = {0, 0, 0, 0, 0, 0, 0, 1, 1};
        for (std::size_t i = 0; i < 9; ++i) CHECK(m.test(i) == (expect[i] != 0));
    }
    SUBCASE("cutoff 0 selects everything") {
        const Mask m = Mask::from_layer_cutoff(layout, 0);
        CHECK(m.ones_count() == 9);
    }
    SUBCASE("cutoff == layer count selects nothing") {
        const Mask m = Mask::from_layer_cutoff(layout, 3);
        CHECK(m.ones_count() == 0);
    }
    SUBCASE("out of range") {
        CHECK_THROWS_AS(Mask::from_layer_cutoff(layout, 4), Error);
    }
    SUBCASE("support is a contiguous tail for any cutoff") {
        for (std::size_t cut = 0; cut <= 3; ++cut) {
            const Mask m = Mask::from_layer_cutoff(layout, cut);
            bool seen_one = false;
            for (std::size_t i = 0; i < m.dim(); ++i) {
                if (m.test(i)) seen_one = true;
                if (seen_one) CHECK(m.test(i));  // no zero after the first one
            }
        }
    }
}

TEST_CASE("masked projection") {
    const ParamVector v(std::vector<double>{1, 2, 3});
    const Mask m = Mask::from_bits({0, 1, 1});
    const ParamVector out = masked(v, m);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 2.0);
    CHECK(out[2] == 3.0);

    CHECK(masked(v, Mask::ones(3)) == v);
    CHECK(norm_sq(masked(v, Mask::zeros(3))) == 0.0);
    CHECK_THROWS_AS(masked(v, Mask::ones(4)), Error);
}

TEST_CASE("vector algebra examples") {
    const ParamVector x(std::vector<double>{1, 0});
    const ParamVector y(std::vector<double>{0, 1});
    const ParamVector r = axpy(2.0, x, y);
    CHECK(r[0] == 2.0);
    CHECK(r[1] == 1.0);

    CHECK(norm_sq(ParamVector(std::vector<double>{3, 4})) == 25.0);
    CHECK(dot(ParamVector(std::vector<double>{1, 2}),
              ParamVector(std::vector<double>{2, -1})) == 0.0);
    CHECK_THROWS_AS(dot(x, ParamVector(3)), Error);

    const auto layout = LayerLayout::from_sizes({{"w", 1}, {"b", 1}});
    const ParamVector slice = layer_slice(r, layout, 1);
    REQUIRE(slice.dim() == 1);
    CHECK(slice[0] == 1.0);
}

TEST_CASE("energy splits across a mask and its complement") {
    RngStream rng = RngStream::keyed(99);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t d = 1 + rng.next_below(64);
        ParamVector v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = rng.next_gaussian() * 2.0;
        std::vector<std::uint8_t> bits(d);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_below(2));
        const Mask m = Mask::from_bits(bits);

        const double split = norm_sq(masked(v, m)) + norm_sq(masked(v, m.complement()));
        const double total = norm_sq(v);
        CHECK(std::abs(split - total) <= 1e-12 * std::max(1.0, total));

        // Projection is idempotent, bitwise.
        const ParamVector once = masked(v, m);
        const ParamVector twice = masked(once, m);
        CHECK(std::memcmp(once.data(), twice.data(), d * sizeof(double)) == 0);

        // Masked energy never exceeds the total (exact, monotone rounding).
        CHECK(norm_sq(once) <= total);
    }
}

TEST_CASE("mask index cache") {
    const Mask m = Mask::from_bits({1, 0, 0, 1, 1});
    CHECK(m.selected_indices() == std::vector<std::size_t>{0, 3, 4});
    CHECK(m.complement().selected_indices() == std::vector<std::size_t>{1, 2});
    CHECK(m.complement().complement() == m);
}
