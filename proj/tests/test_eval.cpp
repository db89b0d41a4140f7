// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "csiloc/config.hpp"
#include "csiloc/errors.hpp"
#include "csiloc/eval.hpp"

using namespace csiloc;
using namespace csiloc::eval;

namespace {

std::string config_error(const std::string& text) {
    try {
        ExperimentConfig::from_json(config::parse_json_text(text, "inline"));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("smoothing leaves constant and linear tracks unchanged") {
    std::vector<Point2> c(50, Point2{3.0, -4.0});
    for (const auto& p : smooth_positions(c, 9)) {
        CHECK(p[0] == doctest::Approx(3.0));
        CHECK(p[1] == doctest::Approx(-4.0));
    }
    std::vector<Point2> line;
    for (int i = 0; i < 40; ++i) line.push_back({0.5 * i, 2.0 - 0.1 * i});
    const auto s = smooth_positions(line, 10);
    for (int i = 0; i < 40; ++i) {
        CHECK(s[i][0] == doctest::Approx(line[i][0]).epsilon(1e-12));
        CHECK(s[i][1] == doctest::Approx(line[i][1]).epsilon(1e-12));
    }
}

TEST_CASE("window of one is the identity and bad inputs throw") {
    std::vector<Point2> p{{1, 2}, {5, 7}, {-3, 0}};
    const auto s = smooth_positions(p, 1);
    CHECK(s == p);
    CHECK_THROWS(smooth_positions(p, 0));
    CHECK_THROWS(smooth_positions(std::span<const Point2>{}, 3));
}

TEST_CASE("centered window averages the expected neighbours") {
    std::vector<Point2> p;
    for (double v : {0.0, 10.0, 20.0, 60.0, 0.0}) p.push_back({v, 0.0});
    const auto s = smooth_positions(p, 2);  // radius 1
    CHECK(s[0][0] == 0.0);
    CHECK(s[1][0] == doctest::Approx(10.0));
    CHECK(s[2][0] == doctest::Approx(30.0));
    CHECK(s[3][0] == doctest::Approx(80.0 / 3.0));
    CHECK(s[4][0] == 0.0);
}

TEST_CASE("smoothing reduces the error of noisy estimates of a slow track") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 4.0);
    std::vector<Point2> truth, pred;
    for (int i = 0; i < 2000; ++i) {
        truth.push_back({-24.0 + 0.024 * i, 20.0});
        pred.push_back({truth.back()[0] + nd(rng), truth.back()[1] + nd(rng)});
    }
    const auto raw = localization_errors(pred, truth);
    const auto sm = localization_errors(smooth_positions(pred, 200), truth);
    CHECK(sm.summary.mean < 0.5 * raw.summary.mean);
}

TEST_CASE("errors and summary statistics") {
    std::vector<Point2> truth{{0, 0}, {1, 1}, {0, 0}, {2, 2}};
    std::vector<Point2> pred{{3, 4}, {1, 1}, {0, 1}, {2, 2}};
    const auto e = localization_errors(pred, truth);
    CHECK(e.per_sample == std::vector<double>{5.0, 0.0, 1.0, 0.0});
    CHECK(e.summary.count == 4);
    CHECK(e.summary.mean == doctest::Approx(1.5));
    CHECK(e.summary.rmse == doctest::Approx(std::sqrt(26.0 / 4.0)));
    CHECK(e.summary.median == doctest::Approx(0.5));
    CHECK(e.summary.max == 5.0);
    CHECK(e.summary.p90 == 5.0);
    CHECK_THROWS(localization_errors(std::span<const Point2>(pred).first(3), truth));
}

TEST_CASE("histogram bins, edge values and overflow") {
    const std::vector<double> e{0.0, 0.5, 1.0, 2.99, 3.0, 7.5};
    const auto h = error_histogram(e, 1.0, 3.0);
    REQUIRE(h.frequency.size() == 3);
    CHECK(h.edges == std::vector<double>{0, 1, 2, 3});
    CHECK(h.frequency[0] == doctest::Approx(2.0 / 6));
    CHECK(h.frequency[1] == doctest::Approx(1.0 / 6));
    CHECK(h.frequency[2] == doctest::Approx(2.0 / 6));  // 2.99 and the value equal to max
    CHECK(h.overflow == doctest::Approx(1.0 / 6));
    double total = h.overflow;
    for (double f : h.frequency) total += f;
    CHECK(total == doctest::Approx(1.0));
    CHECK_THROWS(error_histogram(e, 0.0, 3.0));
    CHECK_THROWS(error_histogram(e, 1.0, 0.0));
    const auto empty = error_histogram({}, 1.0, 2.0);
    CHECK(empty.frequency == std::vector<double>{0.0, 0.0});
}

TEST_CASE("confusion matrix rows are normalized") {
    const std::vector<int> truth{0, 0, 0, 1, 1, 2};
    const std::vector<int> pred{0, 0, 1, 1, 1, 0};
    const auto cm = confusion(pred, truth, 4);
    CHECK(cm.count(0, 0) == 2);
    CHECK(cm.count(0, 1) == 1);
    CHECK(cm.fraction(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(cm.fraction(2, 0) == 1.0);
    CHECK(cm.class_totals == std::vector<std::uint64_t>{3, 2, 1, 0});
    CHECK(cm.accuracy == doctest::Approx(4.0 / 6.0));
    for (std::size_t t = 0; t < 3; ++t) {
        double row = 0.0;
        for (std::size_t p = 0; p < 4; ++p) row += cm.fraction(t, p);
        CHECK(row == doctest::Approx(1.0));
    }
    for (std::size_t p = 0; p < 4; ++p) CHECK(cm.fraction(3, p) == 0.0);
    const std::vector<int> bad{0, 0, 0, 1, 1, 4};
    CHECK_THROWS_AS(confusion(bad, truth, 4), std::out_of_range);
}

TEST_CASE("experiment recipes report the offending field") {
    CHECK(config_error("{}").find("schema_version") != std::string::npos);
    CHECK(config_error(R"({"schema_version": 2})").find("schema_version") != std::string::npos);
    const auto base = config::load_json_file(std::filesystem::path(CSILOC_SOURCE_DIR) / "configs" / "hole.json");
    auto j = base;
    j["bogus"] = 3;
    CHECK(config_error(j.dump()).find("bogus") != std::string::npos);
    j = base;
    j["kind"] = "teleport";
    CHECK(config_error(j.dump()).find("kind") != std::string::npos);
    j = base;
    j["training"]["epochs"] = -2;
    CHECK(config_error(j.dump()).find("training.epochs") != std::string::npos);
    j = base;
    j["scene"]["n_scatterers"] = "many";
    CHECK(config_error(j.dump()).find("scene.n_scatterers") != std::string::npos);
    j = base;
    j["test_trajectory"]["speed"] = 0;
    CHECK(config_error(j.dump()).find("speed") != std::string::npos);
    try {
        config::parse_json_text("{\n  \"a\": ,\n}", "broken.json");
        FAIL("syntax error not reported");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("broken.json:2") != std::string::npos);
    }
}

TEST_CASE("shipped recipes parse and round trip") {
    for (const char* name : {"hole.json", "floor.json"}) {
        const auto path = std::filesystem::path(CSILOC_SOURCE_DIR) / "configs" / name;
        const auto cfg = ExperimentConfig::from_json(config::load_json_file(path));
        CHECK_NOTHROW(cfg.validate());
        const auto again = ExperimentConfig::from_json(cfg.to_json());
        CHECK(again.to_json() == cfg.to_json());
    }
}

TEST_CASE("floor recipes require cross entropy") {
    auto cfg = ExperimentConfig::from_json(
        config::load_json_file(std::filesystem::path(CSILOC_SOURCE_DIR) / "configs" / "floor.json"));
    cfg.training.loss = nn::LossKind::mse;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("report json excludes wall-clock timings") {
    EvalReport r;
    r.kind = "hole";
    r.stage_seconds = {{"train_full", 12.5}};
    const auto j = r.to_json().dump();
    CHECK(j.find("12.5") == std::string::npos);
    CHECK(r.seconds("train_full") == 12.5);
}

}
