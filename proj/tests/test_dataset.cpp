// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "csiloc/dataset.hpp"
#include "csiloc/errors.hpp"
#include "oracles.hpp"

using namespace csiloc;
using namespace csiloc::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "csiloc_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<GeoTaggedSample> random_samples(std::size_t n, std::size_t F, std::uint64_t seed, bool floors = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    std::vector<GeoTaggedSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Position p{u(rng), u(rng), 1.5, std::nullopt};
        if (floors) p.floor_index = static_cast<int>(i % 3);
        out.push_back({0.005 * double(i), p, oracle::random_tensor(ArrayGeometry{}, F, rng, 0.01)});
    }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <class F>
FormatError::Kind error_kind(F&& f) {
    try {
        f();
    } catch (const FormatError& e) {
        return e.kind();
    }
    FAIL("expected a FormatError");
    return FormatError::Kind::io;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("dataset round trip is exact at stored precision") {
    const auto samples = random_samples(7, 32, 1, true);
    const auto path = temp_path("rt.csids");
    DatasetInfo info;
    info.n_subcarriers = 32;
    info.origin = {1.0, 2.0, 3.0};
    info.manifest = R"({"seed":1})";
    CHECK(write_dataset(samples, path, info) == 7);
    CHECK(fs::file_size(path) > 7 * dataset_record_bytes(info.geometry, 32));

    DatasetInfo back_info;
    const auto back = read_dataset(path, &back_info);
    REQUIRE(back.size() == samples.size());
    CHECK(back_info.origin == info.origin);
    CHECK(back_info.manifest == info.manifest);
    CHECK(back_info.geometry == info.geometry);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].timestamp == samples[i].timestamp);
        CHECK(back[i].position == samples[i].position);
        for (std::size_t k = 0; k < back[i].csi.size(); ++k) {
            const auto c = samples[i].csi.data()[k];
            const float re = static_cast<float>(c.real()), im = static_cast<float>(c.imag());
            const cplx expected{re, im};
            REQUIRE(back[i].csi.data()[k] == expected);
        }
    }
}

TEST_CASE("dataset files are byte identical for identical generators") {
    const auto scene = sim::Scene::random_campus(3);
    auto traj = sim::TrajectoryConfig::random_walk(scene.bounds, 3, 1.5, 4);
    traj.max_samples = 9;
    const sim::SampleSource src(scene, traj, sim::ImpairmentProcess{});
    const auto a = temp_path("a.csids"), b = temp_path("b.csids");
    write_dataset(src, a, {});
    write_dataset(src, b, {});
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("dataset corruption is detected") {
    const auto samples = random_samples(4, 16, 2);
    const auto path = temp_path("c.csids");
    DatasetInfo info;
    info.n_subcarriers = 16;
    write_dataset(samples, path, info);
    const std::string good = slurp(path);
    const auto mutated = temp_path("m.csids");

    std::string bad = good;
    bad[0] = 'X';
    spit(mutated, bad);
    CHECK(error_kind([&] { read_dataset(mutated); }) == FormatError::Kind::bad_magic);

    bad = good;
    bad[8] = 2;  // version field
    spit(mutated, bad);
    CHECK(error_kind([&] { read_dataset(mutated); }) == FormatError::Kind::version);

    bad = good;
    bad[good.size() / 2] ^= 0x10;  // inside the records
    spit(mutated, bad);
    CHECK(error_kind([&] { read_dataset(mutated); }) == FormatError::Kind::corrupt);

    bad = good;
    bad[60] ^= 0x01;  // origin, covered by the header checksum
    spit(mutated, bad);
    CHECK(error_kind([&] { read_dataset(mutated); }) == FormatError::Kind::corrupt);

    spit(mutated, good.substr(0, good.size() - 100));
    try {
        read_dataset(mutated);
        FAIL("truncation not detected");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::truncated);
        REQUIRE(e.record().has_value());
        CHECK(*e.record() == 3);
    }
}

TEST_CASE("writer rejects mismatched geometry and decreasing time") {
    const auto path = temp_path("w.csids");
    DatasetInfo info;
    info.n_subcarriers = 16;
    DatasetWriter w(path, info);
    auto s = random_samples(2, 16, 3);
    w.write(s[1]);
    CHECK_THROWS_AS(w.write(s[0]), std::invalid_argument);
    auto other = random_samples(1, 8, 4);
    other[0].timestamp = 10.0;
    CHECK_THROWS_AS(w.write(other[0]), FormatError);
    CHECK(w.finish() == 1);
}

TEST_CASE("random split is a deterministic partition") {
    std::vector<double> ts(1000);
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = double(i);
    const auto a = split(ts, 0.8, 0.2, 7, SplitMode::random);
    const auto b = split(ts, 0.8, 0.2, 7, SplitMode::random);
    CHECK(a.train == b.train);
    CHECK(a.train.size() == 800);
    CHECK(a.test.size() == 200);
    std::vector<int> seen(1000, 0);
    for (auto i : a.train) ++seen[i];
    for (auto i : a.test) ++seen[i];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(std::is_sorted(a.train.begin(), a.train.end()));
    CHECK(split(ts, 0.8, 0.2, 8, SplitMode::random).train != a.train);
}

TEST_CASE("temporal split takes the earliest samples for training") {
    std::vector<double> ts{5, 1, 4, 2, 3};
    const auto s = split(ts, 0.6, 0.4, 0, SplitMode::temporal_prefix);
    CHECK(s.train == std::vector<std::size_t>{1, 3, 4});
    CHECK(s.test == std::vector<std::size_t>{0, 2});
    CHECK_THROWS_AS(split(ts, 0.7, 0.7, 0, SplitMode::random), ConfigError);
}

TEST_CASE("hole cutting partitions with inclusive boundary") {
    std::vector<Position> pos{{0, 0, 0}, {10, 10, 0}, {10.0001, 0, 0}, {-10, -10, 0}, {50, 50, 0}};
    const Region r{-10, 10, -10, 10};
    const auto part = cut_hole(pos, r);
    CHECK(part.inside == std::vector<std::size_t>{0, 1, 3});
    CHECK(part.outside == std::vector<std::size_t>{2, 4});
    CHECK(part.inside.size() + part.outside.size() == pos.size());
    CHECK(Region::parse("-10,10,-10,10").x_min == -10.0);
    CHECK_THROWS(Region::parse("1,2,3"));
    CHECK_THROWS(Region::parse("2,1,0,1"));
}

TEST_CASE("feature cache round trip is exact") {
    const auto samples = random_samples(5, 80, 5, true);
    const auto deltas = features::DelaySet::parse("0:60:4");
    auto table = to_feature_matrix(samples, deltas);
    table.manifest = R"({"k":1})";
    CHECK(table.width() == 1024);
    CHECK(table.n_classes == 3);
    const auto path = temp_path("f.csifc");
    write_feature_cache(table, path);
    const auto back = read_feature_cache(path);
    CHECK(back.values == table.values);
    CHECK(back.deltas == table.deltas);
    CHECK(back.floor_eps == table.floor_eps);
    CHECK(back.n_classes == 3);
    CHECK(back.manifest == table.manifest);
    CHECK(back.floor_labels() == table.floor_labels());
    CHECK(back.positions() == table.positions());

    std::string bytes = slurp(path);
    bytes[bytes.size() - 40] ^= 0x04;
    const auto bad = temp_path("fbad.csifc");
    spit(bad, bytes);
    CHECK(error_kind([&] { read_feature_cache(bad); }) == FormatError::Kind::corrupt);
    bytes = slurp(path);
    bytes[8] = 9;
    spit(bad, bytes);
    CHECK(error_kind([&] { read_feature_cache(bad); }) == FormatError::Kind::version);
}

TEST_CASE("feature rows follow dataset order and subset keeps labels") {
    const auto samples = random_samples(6, 64, 6);
    const auto deltas = features::DelaySet::parse("0:48:8");
    const auto table = to_feature_matrix(samples, deltas);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto fv = features::extract(samples[i].csi, deltas);
        for (std::size_t k = 0; k < fv.size(); ++k) REQUIRE(table.row(i)[k] == static_cast<float>(fv.values[k]));
    }
    const std::vector<std::size_t> idx{4, 1};
    const auto sub = subset(table, idx);
    CHECK(sub.rows() == 2);
    CHECK(sub.labels[0].position == samples[4].position);
    CHECK(std::equal(sub.row(1).begin(), sub.row(1).end(), table.row(1).begin()));
}

TEST_CASE("re-impaired extraction matches the clean cache") {
    const auto samples = random_samples(6, 288, 7);
    const auto path = temp_path("imp.csids");
    write_dataset(samples, path, {});
    const auto deltas = features::DelaySet::standard();
    DatasetReader plain(path);
    const auto a = to_feature_matrix(plain, deltas);
    DatasetReader again(path);
    const auto b = to_feature_matrix(again, deltas, features::kDefaultFloorEps, true, 99);
    REQUIRE(a.values.size() == b.values.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        worst = std::max(worst, std::abs(double(a.values[i]) - double(b.values[i])) /
                                    std::max(1.0, std::abs(double(a.values[i]))));
    CHECK(worst <= 1e-6);
}

TEST_CASE("incompatible feature tables are reported") {
    const auto samples = random_samples(2, 64, 8);
    const auto a = to_feature_matrix(samples, features::DelaySet::parse("0:48:8"));
    const auto b = to_feature_matrix(samples, features::DelaySet::parse("0:40:8"));
    CHECK(error_kind([&] { a.check_compatible(b); }) == FormatError::Kind::geometry_mismatch);
    CHECK_NOTHROW(a.check_compatible(a));
}

}
