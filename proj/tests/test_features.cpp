// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "csiloc/channel_sim.hpp"
#include "csiloc/errors.hpp"
#include "csiloc/features.hpp"
#include "oracles.hpp"

using namespace csiloc;
using namespace csiloc::features;

namespace {

double max_rel_dev(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1e-300));
    return worst;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("default delay set has sixteen lags 0..60 step 4") {
    const auto d = DelaySet::standard();
    REQUIRE(d.size() == 16);
    for (std::size_t k = 0; k < 16; ++k) CHECK(d.deltas()[k] == 4 * k);
    CHECK(feature_length(ArrayGeometry{}, d) == 1024);
}

TEST_CASE("delay set parsing") {
    CHECK(DelaySet::parse("default") == DelaySet::standard());
    CHECK(DelaySet::parse("0:60:4") == DelaySet::standard());
    CHECK(DelaySet::parse("0,1,5").to_string() == "0,1,5");
    CHECK_THROWS_AS(DelaySet::parse("0:60"), std::invalid_argument);
    CHECK_THROWS_AS(DelaySet::parse("a,b"), std::invalid_argument);
    CHECK_THROWS_AS(DelaySet::parse("4,2"), std::invalid_argument);
    CHECK_THROWS_AS(DelaySet::parse("0:10:0"), std::invalid_argument);
    CHECK_THROWS_AS(DelaySet(std::vector<std::size_t>{}), std::invalid_argument);
}

TEST_CASE("delay validation against the subcarrier count") {
    CHECK_NOTHROW(DelaySet::standard().validate(288));
    CHECK_THROWS_AS(DelaySet({0, 288}).validate(288), std::out_of_range);
    CHECK_THROWS_AS(DelaySet({0, 280}).validate(288), std::out_of_range);  // only 8 averaged terms
    CHECK_NOTHROW(DelaySet({0, 272}).validate(288));
}

TEST_CASE("beam transform matches a direct 2D DFT") {
    std::mt19937_64 rng(1);
    const ArrayGeometry g;
    for (int trial = 0; trial < 5; ++trial) {
        const auto h = oracle::random_tensor(g, 12, rng);
        const auto fast = beam_transform(h).beams;
        const auto slow = oracle::naive_beams(h);
        for (std::size_t i = 0; i < fast.size(); ++i) REQUIRE(std::abs(fast.data()[i] - slow.data()[i]) < 1e-12);
    }
}

TEST_CASE("beam transform of a single steering vector concentrates in one beam") {
    // Element phases exp(-j 2pi (z0 m / M + a0 n / N)) map onto beam (z0, a0).
    const ArrayGeometry g;
    CsiTensor h(g, 4);
    const std::size_t z0 = 1, a0 = 5;
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t m = 0; m < 4; ++m)
            for (std::size_t n = 0; n < 8; ++n)
                for (std::size_t f = 0; f < 4; ++f)
                    h(p, m, n, f) = std::polar(1.0, kTwoPi * (double(z0 * m) / 4.0 + double(a0 * n) / 8.0));
    const auto b = beam_transform(h).beams;
    for (std::size_t z = 0; z < 4; ++z)
        for (std::size_t a = 0; a < 8; ++a) {
            const double mag = std::abs(b(0, z, a, 0));
            if (z == z0 && a == a0)
                CHECK(mag == doctest::Approx(std::sqrt(32.0)).epsilon(1e-12));
            else
                CHECK(mag < 1e-12);
        }
}

TEST_CASE("beam transform preserves energy per polarization and subcarrier") {
    std::mt19937_64 rng(2);
    const ArrayGeometry g;
    const auto h = oracle::random_tensor(g, 64, rng);
    const auto b = beam_transform(h).beams;
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t f = 0; f < 64; ++f) {
            double ea = 0.0, eb = 0.0;
            for (std::size_t m = 0; m < 4; ++m)
                for (std::size_t n = 0; n < 8; ++n) {
                    ea += std::norm(h(p, m, n, f));
                    eb += std::norm(b(p, m, n, f));
                }
            CHECK(std::abs(ea - eb) <= 1e-12 * ea);
        }
}

TEST_CASE("autocorrelation matches the naive double loop") {
    std::mt19937_64 rng(3);
    const ArrayGeometry g;
    const auto d = DelaySet::standard();
    const std::vector<std::size_t> dv(d.deltas().begin(), d.deltas().end());
    for (int trial = 0; trial < 5; ++trial) {
        const auto b = beam_transform(oracle::random_tensor(g, 288, rng));
        const auto fast = freq_autocorr(b, d);
        CHECK(fast.n_delays == 16);
        CHECK(max_rel_dev(fast.values, oracle::naive_autocorr(b.beams, dv)) <= 1e-12);
    }
}

TEST_CASE("zero lag autocorrelation is the mean power") {
    std::mt19937_64 rng(4);
    const auto b = beam_transform(oracle::random_tensor(ArrayGeometry{}, 32, rng));
    const auto r = freq_autocorr(b, DelaySet({0}));
    const auto x = b.beams.plane(1, 2, 3);
    double power = 0.0;
    for (auto c : x) power += std::norm(c);
    CHECK(r.values[(1 * 4 + 2) * 8 + 3] == doctest::Approx(power / 32.0).epsilon(1e-13));
}

TEST_CASE("pure delay gives flat autocorrelation magnitude") {
    // x(f) = exp(-j 2 pi f tau') -> |R(delta)| = 1 for every lag.
    const ArrayGeometry g;
    CsiTensor h(g, 288);
    for (std::size_t f = 0; f < 288; ++f) h(0, 0, 0, f) = std::polar(1.0, -0.37 * double(f));
    const auto r = freq_autocorr(beam_transform(h), DelaySet::standard());
    const double expected = 1.0 / 32.0;  // one antenna spread over 32 beams in power
    for (std::size_t k = 0; k < 16; ++k) CHECK(r.values[k] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("features are invariant to common phase and phase ramp") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uphi(0.0, kTwoPi), ualpha(-kPi / 64, kPi / 64);
    const ArrayGeometry g;
    const auto d = DelaySet::standard();
    for (int trial = 0; trial < 50; ++trial) {
        const auto h = oracle::random_tensor(g, 288, rng);
        const Impairments imp{uphi(rng), ualpha(rng)};
        const auto a = extract(h, d);
        const auto b = extract(sim::apply_impairments(h, imp), d);
        for (std::size_t i = 0; i < a.size(); ++i)
            REQUIRE(std::abs(a.values[i] - b.values[i]) <= 1e-9 * std::max(std::abs(a.values[i]), 1e-12));
    }
}

TEST_CASE("feature vector length and flatten order") {
    std::mt19937_64 rng(6);
    const ArrayGeometry g;
    const auto h = oracle::random_tensor(g, 288, rng);
    CHECK(h.size() == 18432);
    const auto d = DelaySet::standard();
    const auto fv = extract(h, d);
    REQUIRE(fv.size() == 1024);
    const auto r = freq_autocorr(beam_transform(h), d);
    // (p, z, a, delta) row-major
    CHECK(fv.values[((1 * 4 + 3) * 8 + 7) * 16 + 15] == doctest::Approx(std::log(r.values.back())));
}

TEST_CASE("log floor and contract checks") {
    AutocorrTensor t{ArrayGeometry{}, 1, {0.0, 1.0, 1e-20}};
    const auto fv = log_features(t, 1e-12);
    CHECK(fv.values[0] == doctest::Approx(std::log(1e-12)));
    CHECK(fv.values[1] == 0.0);
    CHECK(fv.values[2] == doctest::Approx(std::log(1e-12)));
    AutocorrTensor bad{ArrayGeometry{}, 1, {-1.0}};
    CHECK_THROWS_AS(log_features(bad), ContractViolation);
    CHECK_THROWS_AS(log_features(t, 0.0), std::invalid_argument);
}

TEST_CASE("autocorrelation rejects lags beyond the band") {
    std::mt19937_64 rng(7);
    const auto b = beam_transform(oracle::random_tensor(ArrayGeometry{}, 16, rng));
    CHECK_THROWS_AS(freq_autocorr(b, DelaySet({0, 16})), std::out_of_range);
}

TEST_CASE("parallel row extraction equals the serial path") {
    std::mt19937_64 rng(8);
    const ArrayGeometry g;
    std::vector<CsiTensor> batch;
    for (int i = 0; i < 9; ++i) batch.push_back(oracle::random_tensor(g, 96, rng));
    const auto d = DelaySet::parse("0:40:4");
    std::vector<float> rows(batch.size() * feature_length(g, d));
    extract_rows(batch, d, kDefaultFloorEps, rows);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto fv = extract(batch[i], d);
        for (std::size_t k = 0; k < fv.size(); ++k)
            REQUIRE(rows[i * fv.size() + k] == static_cast<float>(fv.values[k]));
    }
}

}
