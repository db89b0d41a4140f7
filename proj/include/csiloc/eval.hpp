// SPDX-License-Identifier: Apache-2.0
//
// Evaluation quantities (localization errors, smoothing, histograms,
// confusion tables) and the end-to-end experiment runner.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csiloc/config.hpp"
#include "csiloc/dataset.hpp"
#include "csiloc/nn.hpp"

namespace csiloc::eval {

using Point2 = std::array<double, 2>;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kCsvVersion = 1;

// Centered moving average. Sample i averages indices [i - r, i + r] with
// r = min(window / 2, i, n - 1 - i), i.e. the window shrinks symmetrically
// near the ends so a constant-velocity track is reproduced without lag.
// An even window w behaves like w + 1 away from the edges.
std::vector<Point2> smooth_positions(std::span<const Point2> predictions, std::size_t window);

struct ErrorSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double rmse = 0.0;
    double median = 0.0;
    double p90 = 0.0;
    double max = 0.0;
};

ErrorSummary summarize(std::span<const double> errors);

struct LocalizationErrors {
    std::vector<double> per_sample;  // meters
    ErrorSummary summary;
};

LocalizationErrors localization_errors(std::span<const Point2> predicted, std::span<const Point2> truth);

struct Histogram {
    double bin_width = 1.0;
    double max = 0.0;
    std::vector<double> edges;      // n_bins + 1 edges from 0 to n_bins * bin_width
    std::vector<double> frequency;  // relative frequency per bin
    double overflow = 0.0;          // relative frequency of values > max
};

// Bins [k w, (k+1) w); a value equal to `max` lands in the last bin.
Histogram error_histogram(std::span<const double> errors, double bin_width, double max);

struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::uint64_t> counts;  // row = true class, column = predicted
    std::vector<double> fractions;      // row-normalized counts (rows without samples stay 0)
    std::vector<double> per_class_accuracy;
    std::vector<std::uint64_t> class_totals;
    double accuracy = 0.0;

    std::uint64_t count(std::size_t truth, std::size_t pred) const { return counts[truth * n_classes + pred]; }
    double fraction(std::size_t truth, std::size_t pred) const { return fractions[truth * n_classes + pred]; }
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth, std::size_t n_classes);

// ---------------------------------------------------------------------------

struct NamedRegion {
    std::string name;
    data::Region region;
};

struct RegionEval {
    std::string name;
    data::Region region;
    std::size_t inside = 0;
    std::size_t outside = 0;
    ErrorSummary raw;
    ErrorSummary smoothed;
};

struct EvalSettings {
    std::size_t smooth_window = 2000;
    double hist_bin_width = 1.0;
    double hist_max = 50.0;
    std::vector<NamedRegion> regions;
};

struct LocalizationEval {
    std::vector<double> timestamps;
    std::vector<Point2> truth, predicted, smoothed;
    LocalizationErrors raw, smoothed_errors;
    Histogram hist_raw, hist_smoothed;
    std::size_t smooth_window = 1;
    std::vector<RegionEval> regions;
};

LocalizationEval evaluate_localization(std::span<const double> timestamps, std::span<const Point2> truth,
                                       std::span<const Point2> predicted, const EvalSettings& settings);

struct ClassificationEval {
    std::vector<int> truth, predicted;
    ConfusionMatrix confusion;
};

ClassificationEval evaluate_classification(std::span<const int> truth, std::span<const int> predicted,
                                           std::size_t n_classes);

// Runs a model over a feature table in chunks (eval mode).
std::vector<Point2> predict_positions(const nn::MlpModel<float>& model, const data::FeatureTable& table,
                                      std::size_t chunk = 1000);
std::vector<int> predict_classes(const nn::MlpModel<float>& model, const data::FeatureTable& table,
                                 std::size_t chunk = 1000);

// Row-major float feature table -> column-major training matrix.
nn::Matrix<float> feature_matrix(const data::FeatureTable& table);

// ---------------------------------------------------------------------------

struct ModelReport {
    std::string name;  // "full", "holed", "floor"
    std::size_t train_rows = 0;
    std::vector<double> loss_history;
    std::optional<LocalizationEval> localization;
    std::optional<ClassificationEval> classification;
};

struct EvalReport {
    std::string kind;
    config::Json manifest;  // resolved recipe, seeds, format versions
    std::vector<ModelReport> models;
    std::vector<std::pair<std::string, double>> stage_seconds;  // wall clock, kept out of report.json

    const ModelReport& model(const std::string& name) const;
    double seconds(const std::string& stage) const;

    // Metrics and manifest; contains no timings so reruns compare bitwise.
    config::Json to_json() const;
    // report.json, timing.json and CSV artifacts (plus SVG plots if `svg`).
    void write(const std::filesystem::path& dir, bool svg = true) const;
};

// Frozen CSV layouts.
void write_errors_csv(const LocalizationEval& ev, const std::filesystem::path& path);
void write_histogram_csv(const LocalizationEval& ev, const std::filesystem::path& path);
void write_loss_csv(std::span<const double> loss, const std::filesystem::path& path);
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);
void write_histogram_svg(const Histogram& raw, const Histogram& smoothed, const std::filesystem::path& path);
void write_track_svg(const LocalizationEval& ev, const std::filesystem::path& path);

config::Json to_json(const LocalizationEval& ev);
config::Json to_json(const ClassificationEval& ev);

// ---------------------------------------------------------------------------

struct ExperimentConfig {
    enum class Kind { localization, hole, floor };
    Kind kind = Kind::localization;
    sim::Scene scene;

    // localization / hole
    sim::TrajectoryConfig train_trajectory, test_trajectory;
    // floor
    sim::FloorCapture train_floors, test_floors;

    sim::ImpairmentProcess train_impairments, test_impairments;
    features::DelaySet deltas = features::DelaySet::standard();
    double floor_eps = features::kDefaultFloorEps;
    nn::TrainConfig training;
    std::uint64_t model_seed = 0;
    std::optional<data::Region> hole;
    EvalSettings eval;

    void validate() const;
    config::Json to_json() const;
    static ExperimentConfig from_json(const config::Json& j);
};

std::string kind_name(ExperimentConfig::Kind kind);

// Progress messages (stage starts, per-epoch losses) go to `log` if set.
// Any stage failure is rethrown with the stage name prefixed.
EvalReport run_experiment(const ExperimentConfig& cfg, const std::function<void(const std::string&)>& log = {});

}  // namespace csiloc::eval
