// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "csiloc/core.hpp"
#include "csiloc/errors.hpp"

using namespace csiloc;

TEST_SUITE("core") {

TEST_CASE("flatten and unflatten are inverse over the whole default tensor") {
    const ArrayGeometry g;
    const std::size_t F = 288;
    std::size_t expected = 0;
    for (std::size_t p = 0; p < g.n_pol; ++p)
        for (std::size_t m = 0; m < g.n_rows; ++m)
            for (std::size_t n = 0; n < g.n_cols; ++n)
                for (std::size_t f = 0; f < F; ++f) {
                    const TensorIndex idx{p, m, n, f};
                    const auto lin = flatten_index(idx, g, F);
                    REQUIRE(lin == expected++);
                    REQUIRE(unflatten_index(lin, g, F) == idx);
                }
    CHECK(expected == 18432);
}

TEST_CASE("index helpers reject out-of-range input") {
    const ArrayGeometry g;
    CHECK_THROWS_AS(flatten_index({2, 0, 0, 0}, g, 288), std::out_of_range);
    CHECK_THROWS_AS(flatten_index({0, 4, 0, 0}, g, 288), std::out_of_range);
    CHECK_THROWS_AS(flatten_index({0, 0, 0, 288}, g, 288), std::out_of_range);
    CHECK_THROWS_AS(unflatten_index(18432, g, 288), std::out_of_range);
}

TEST_CASE("tensor accessor agrees with flatten_index") {
    const ArrayGeometry g;
    CsiTensor t(g, 16);
    t(1, 2, 3, 4) = {5.0, -6.0};
    CHECK(t.data()[flatten_index({1, 2, 3, 4}, g, 16)] == cplx{5.0, -6.0});
    CHECK(t.plane(1, 2, 3)[4] == cplx{5.0, -6.0});
}

TEST_CASE("tensor construction validates shape and finiteness") {
    const ArrayGeometry g;
    CHECK_THROWS(CsiTensor(g, 1));
    CHECK_THROWS(CsiTensor(g, 8, std::vector<cplx>(10)));
    std::vector<cplx> bad(g.n_antennas() * 8, cplx{1.0, 0.0});
    bad[3] = {std::nan(""), 0.0};
    CHECK_THROWS(CsiTensor(g, 8, bad));
    ArrayGeometry single_pol;
    single_pol.n_pol = 1;
    CHECK_THROWS(single_pol.validate());
}

TEST_CASE("impairments canonicalize phi into [0, 2pi)") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 1000; ++i) {
        const Impairments imp{u(rng), 0.01};
        const auto c = imp.canonical();
        CHECK(c.phi >= 0.0);
        CHECK(c.phi < kTwoPi);
        CHECK(std::abs(std::remainder(c.phi - imp.phi, kTwoPi)) < 1e-9);
        CHECK(c.alpha == imp.alpha);
    }
}

TEST_CASE("distances") {
    CHECK(distance_2d({0, 0, 0}, {3, 4, 10}) == doctest::Approx(5.0));
    CHECK(distance({0, 0, 0}, {2, 3, 6}) == doctest::Approx(7.0));
}

}
