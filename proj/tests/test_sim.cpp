// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <omp.h>

#include "csiloc/channel_sim.hpp"
#include "csiloc/errors.hpp"

using namespace csiloc;
using namespace csiloc::sim;

namespace {

Scene los_only_scene() {
    Scene s;
    s.scatterers.clear();
    s.los_blockage.clear();
    s.noise_std = 0.0;
    return s;
}

}  // namespace

TEST_SUITE("channel_sim") {

TEST_CASE("single line-of-sight path matches the closed-form array response") {
    const Scene s = los_only_scene();
    const Position ue{13.0, 40.0, 1.5};
    const auto h = synth_channel_clean(s, ue);

    const double dx = ue.x - s.bs_position.x, dy = ue.y - s.bs_position.y, dz = ue.z - s.bs_position.z;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double ux = dx / d, uy = dy / d, uz = dz / d;
    // Array axes for boresight azimuth pi/2 and downtilt 0.1: rows along the
    // tilted vertical, columns along -x.
    const double tilt = s.array_downtilt;
    const double along_rows = uy * std::sin(tilt) + uz * std::cos(tilt);
    const double along_cols = -ux;
    const double lambda = kSpeedOfLight / s.carrier_freq;
    const double pol[2] = {std::cos(kPi / 4), std::sin(kPi / 4)};
    double worst = 0.0;
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t m = 0; m < 4; ++m)
            for (std::size_t n = 0; n < 8; ++n)
                for (std::size_t f = 0; f < 288; f += 7) {
                    const double phase = -kTwoPi * d / lambda +
                                         kTwoPi * 0.5 * (double(m) * along_rows + double(n) * along_cols) -
                                         kTwoPi * double(f) * s.subcarrier_spacing * d / kSpeedOfLight;
                    const cplx expected = std::polar(pol[p] / d, phase);
                    worst = std::max(worst, std::abs(h(p, m, n, f) - expected) / std::abs(expected));
                }
    CHECK(worst < 1e-9);
}

TEST_CASE("blocked line of sight removes exactly one path") {
    Scene s = Scene::random_campus(3, 5, 0);
    const Position ue{0.0, 0.0, 1.5};
    CHECK(trace_paths(s, ue).size() == 6);
    s.los_blockage.push_back({-1.0, 1.0, -1.0, 1.0});
    CHECK(trace_paths(s, ue).size() == 5);
}

TEST_CASE("coincident geometry is rejected") {
    Scene s = los_only_scene();
    CHECK_THROWS_AS(trace_paths(s, s.bs_position), DegenerateGeometryError);
    s.scatterers.push_back({{5.0, 5.0, 1.5}, {1.0, 0.0}});
    CHECK_THROWS_AS(trace_paths(s, {5.0, 5.0, 1.5}), DegenerateGeometryError);
}

TEST_CASE("impairments multiply by exp(j(phi + alpha f))") {
    const Scene s = Scene::random_campus(4);
    const auto h = synth_channel_clean(s, {10.0, 10.0, 1.5});
    const Impairments imp{1.3, -0.02};
    const auto g = apply_impairments(h, imp);
    for (std::size_t f = 0; f < 288; f += 13) {
        const cplx r = std::polar(1.0, imp.phi + imp.alpha * double(f));
        CHECK(std::abs(g(1, 3, 2, f) - h(1, 3, 2, f) * r) < 1e-15);
    }
    CHECK_THROWS(apply_impairments(h, {std::nan(""), 0.0}));
}

TEST_CASE("noise power matches the configured standard deviation") {
    CsiTensor z(ArrayGeometry{}, 288);
    Rng rng(9);
    add_noise(z, 0.5, rng);
    double power = 0.0;
    for (auto c : z.data()) power += std::norm(c);
    power /= double(z.size());
    // 18432 samples of an exponential variable: relative std about 0.7 %.
    CHECK(power == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("trajectory sampling includes both endpoints") {
    TrajectoryConfig t;
    t.waypoints = {{0, 0, 1.5}, {12, 0, 1.5}};
    t.speed = 1.2;
    t.sample_rate = 200;
    CHECK(t.sample_count() == 2001);
    const auto pos = t.sample_positions();
    CHECK(pos.front().second.x == 0.0);
    CHECK(pos.back().second.x == doctest::Approx(12.0));
    CHECK(pos[200].first == doctest::Approx(1.0));
    t.max_samples = 50;
    CHECK(t.sample_positions().size() == 50);
    t.waypoints.pop_back();
    CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("multi-segment trajectory keeps constant speed") {
    TrajectoryConfig t;
    t.waypoints = {{0, 0, 1.5}, {3, 0, 1.5}, {3, 4, 1.5}};
    t.speed = 1.0;
    t.sample_rate = 1.0;
    const auto pos = t.sample_positions();
    REQUIRE(pos.size() == 8);
    CHECK(pos[3].second.x == doctest::Approx(3.0));
    CHECK(pos[5].second.y == doctest::Approx(2.0));
}

TEST_CASE("per-sample impairments stay inside their ranges and are counter based") {
    ImpairmentProcess p;
    p.mode = ImpairmentProcess::Mode::per_sample_random;
    p.alpha_range = kPi / 64;
    const auto a = p.draw(500);
    const auto b = p.draw(100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].phi >= 0.0);
        CHECK(a[i].phi < kTwoPi);
        CHECK(std::abs(a[i].alpha) <= kPi / 64);
    }
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(a[i].phi == b[i].phi);
}

TEST_CASE("random-walk impairments are reflected into range") {
    ImpairmentProcess p;
    p.mode = ImpairmentProcess::Mode::random_walk;
    p.alpha_range = 0.01;
    p.alpha_step = 0.005;
    for (const auto& imp : p.draw(5000)) {
        CHECK(std::abs(imp.alpha) <= 0.01 + 1e-15);
        CHECK(imp.phi >= 0.0);
        CHECK(imp.phi < kTwoPi);
    }
    p.alpha_range = 4.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("samples are identical regardless of batching and thread count") {
    const Scene s = Scene::random_campus(5);
    TrajectoryConfig t = TrajectoryConfig::random_walk(s.bounds, 4, 1.5, 6);
    t.max_samples = 12;
    const SampleSource src(s, t, ImpairmentProcess{});
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = src.batch(0, 12);
    omp_set_num_threads(4);
    const auto four = src.batch(0, 12);
    omp_set_num_threads(saved);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(one[i].csi == four[i].csi);
        CHECK(one[i].csi == src.sample(i).csi);
    }
    CHECK(src.batch(5, 3)[1].csi == one[6].csi);
}

TEST_CASE("trajectories leaving the scene are rejected up front") {
    const Scene s = Scene::random_campus(5);
    TrajectoryConfig t;
    t.waypoints = {{0, 0, 1.5}, {150, 0, 1.5}};
    CHECK_THROWS_AS(SampleSource(s, t, ImpairmentProcess{}), ConfigError);
}

TEST_CASE("floor captures are floor-major with jitter inside the disk") {
    const Scene s = Scene::random_campus(7);
    FloorCapture fc;
    fc.dwell = 0.5;
    fc.sample_rate = 20;
    fc.jitter = 0.5;
    const SampleSource src(s, fc, ImpairmentProcess{});
    REQUIRE(src.size() == 6 * 10);
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto& p = src.position(i);
        const int floor = static_cast<int>(i / 10);
        CHECK(p.floor_index == floor);
        CHECK(p.z == doctest::Approx(1.5 + 3.0 * floor));
        CHECK(std::hypot(p.x - fc.x, p.y - fc.y) <= 0.5 + 1e-12);
    }
    fc.floor_height = 0.0;
    CHECK_THROWS_AS(fc.validate(), DegenerateGeometryError);
}

TEST_CASE("seed mixing separates streams and counters") {
    CHECK(mix_seed(1, 0, 0) != mix_seed(1, 1, 0));
    CHECK(mix_seed(1, 0, 0) != mix_seed(1, 0, 1));
    CHECK(mix_seed(1, 0, 0) != mix_seed(2, 0, 0));
    CHECK(mix_seed(1, 5, 9) == mix_seed(1, 5, 9));
}

}
