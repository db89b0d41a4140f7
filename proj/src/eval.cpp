// SPDX-License-Identifier: Apache-2.0

#include "csiloc/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "csiloc/errors.hpp"
#include "csiloc/version.hpp"

namespace csiloc::eval {

std::vector<Point2> smooth_positions(std::span<const Point2> predictions, std::size_t window) {
    if (predictions.empty()) throw std::invalid_argument("smooth_positions: empty input");
    if (window < 1) throw std::invalid_argument("smooth_positions: window must be >= 1");
    const std::size_t n = predictions.size();
    const std::size_t half = window / 2;
    std::vector<Point2> out(n);
    // Prefix sums keep this O(n) for large windows.
    std::vector<double> sx(n + 1, 0.0), sy(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sx[i + 1] = sx[i] + predictions[i][0];
        sy[i + 1] = sy[i] + predictions[i][1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = std::min({half, i, n - 1 - i});
        if (r == 0) {
            out[i] = predictions[i];
            continue;
        }
        const double cnt = static_cast<double>(2 * r + 1);
        out[i] = {(sx[i + r + 1] - sx[i - r]) / cnt, (sy[i + r + 1] - sy[i - r]) / cnt};
    }
    return out;
}

ErrorSummary summarize(std::span<const double> errors) {
    ErrorSummary s;
    s.count = errors.size();
    if (errors.empty()) return s;
    double sum = 0.0, sq = 0.0;
    for (double e : errors) {
        sum += e;
        sq += e * e;
    }
    const double n = static_cast<double>(errors.size());
    s.mean = sum / n;
    s.rmse = std::sqrt(sq / n);
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    s.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    // nearest rank
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * n));
    s.p90 = sorted[std::max<std::size_t>(rank, 1) - 1];
    s.max = sorted.back();
    return s;
}

LocalizationErrors localization_errors(std::span<const Point2> predicted, std::span<const Point2> truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("localization_errors: " + std::to_string(predicted.size()) +
                                    " predictions vs " + std::to_string(truth.size()) + " ground-truth positions");
    LocalizationErrors out;
    out.per_sample.resize(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        out.per_sample[i] = std::hypot(predicted[i][0] - truth[i][0], predicted[i][1] - truth[i][1]);
    out.summary = summarize(out.per_sample);
    return out;
}

Histogram error_histogram(std::span<const double> errors, double bin_width, double max) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw std::invalid_argument("histogram bin_width must be > 0");
    if (!(max > 0.0) || !std::isfinite(max)) throw std::invalid_argument("histogram max must be > 0");
    Histogram h;
    h.bin_width = bin_width;
    h.max = max;
    auto n_bins = static_cast<std::size_t>(std::ceil(max / bin_width));
    // Guard against max / bin_width landing a hair above an integer.
    if (n_bins > 1 && static_cast<double>(n_bins - 1) * bin_width >= max) --n_bins;
    n_bins = std::max<std::size_t>(n_bins, 1);
    for (std::size_t k = 0; k < n_bins; ++k) h.edges.push_back(static_cast<double>(k) * bin_width);
    h.edges.push_back(max);
    h.frequency.assign(n_bins, 0.0);
    if (errors.empty()) return h;

    std::vector<std::uint64_t> counts(n_bins, 0);
    std::uint64_t over = 0;
    for (double e : errors) {
        if (!(e >= 0.0)) throw std::invalid_argument("histogram input must be non-negative");
        if (e > max) {
            ++over;
            continue;
        }
        const auto k = std::min(static_cast<std::size_t>(e / bin_width), n_bins - 1);
        ++counts[k];
    }
    const double n = static_cast<double>(errors.size());
    for (std::size_t k = 0; k < n_bins; ++k) h.frequency[k] = static_cast<double>(counts[k]) / n;
    h.overflow = static_cast<double>(over) / n;
    return h;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth, std::size_t n_classes) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("confusion: prediction and label counts differ");
    if (n_classes < 1) throw std::invalid_argument("confusion: need at least one class");
    ConfusionMatrix cm;
    cm.n_classes = n_classes;
    cm.counts.assign(n_classes * n_classes, 0);
    const auto k = static_cast<int>(n_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k)
            throw std::out_of_range("confusion: label out of range at sample " + std::to_string(i));
        ++cm.counts[static_cast<std::size_t>(truth[i]) * n_classes + static_cast<std::size_t>(predicted[i])];
    }
    cm.fractions.assign(n_classes * n_classes, 0.0);
    cm.per_class_accuracy.assign(n_classes, 0.0);
    cm.class_totals.assign(n_classes, 0);
    std::uint64_t correct = 0;
    for (std::size_t r = 0; r < n_classes; ++r) {
        std::uint64_t total = 0;
        for (std::size_t c = 0; c < n_classes; ++c) total += cm.count(r, c);
        cm.class_totals[r] = total;
        correct += cm.count(r, r);
        if (total == 0) continue;
        for (std::size_t c = 0; c < n_classes; ++c)
            cm.fractions[r * n_classes + c] = static_cast<double>(cm.count(r, c)) / static_cast<double>(total);
        cm.per_class_accuracy[r] = cm.fraction(r, r);
    }
    cm.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    return cm;
}

// ---------------------------------------------------------------------------

LocalizationEval evaluate_localization(std::span<const double> timestamps, std::span<const Point2> truth,
                                       std::span<const Point2> predicted, const EvalSettings& settings) {
    if (timestamps.size() != truth.size())
        throw std::invalid_argument("evaluate_localization: timestamp and label counts differ");
    LocalizationEval ev;
    ev.timestamps.assign(timestamps.begin(), timestamps.end());
    ev.truth.assign(truth.begin(), truth.end());
    ev.predicted.assign(predicted.begin(), predicted.end());
    ev.raw = localization_errors(predicted, truth);
    ev.smooth_window = settings.smooth_window;
    ev.smoothed = smooth_positions(predicted, settings.smooth_window);
    ev.smoothed_errors = localization_errors(ev.smoothed, truth);
    ev.hist_raw = error_histogram(ev.raw.per_sample, settings.hist_bin_width, settings.hist_max);
    ev.hist_smoothed = error_histogram(ev.smoothed_errors.per_sample, settings.hist_bin_width, settings.hist_max);
    for (const auto& nr : settings.regions) {
        RegionEval re;
        re.name = nr.name;
        re.region = nr.region;
        std::vector<double> raw, sm;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (nr.region.contains(truth[i][0], truth[i][1])) {
                raw.push_back(ev.raw.per_sample[i]);
                sm.push_back(ev.smoothed_errors.per_sample[i]);
            }
        }
        re.inside = raw.size();
        re.outside = truth.size() - raw.size();
        re.raw = summarize(raw);
        re.smoothed = summarize(sm);
        ev.regions.push_back(std::move(re));
    }
    return ev;
}

ClassificationEval evaluate_classification(std::span<const int> truth, std::span<const int> predicted,
                                           std::size_t n_classes) {
    ClassificationEval ev;
    ev.truth.assign(truth.begin(), truth.end());
    ev.predicted.assign(predicted.begin(), predicted.end());
    ev.confusion = confusion(predicted, truth, n_classes);
    return ev;
}

nn::Matrix<float> feature_matrix(const data::FeatureTable& table) {
    using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(table.values.data(), static_cast<Eigen::Index>(table.rows()),
                                      static_cast<Eigen::Index>(table.width()));
}

namespace {

template <class F>
void for_chunks(const nn::MlpModel<float>& model, const data::FeatureTable& table, std::size_t chunk, F&& sink) {
    if (table.width() != model.input_dim())
        throw std::invalid_argument("feature width " + std::to_string(table.width()) + " does not match model input " +
                                    std::to_string(model.input_dim()));
    using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    chunk = std::max<std::size_t>(chunk, 1);
    for (std::size_t first = 0; first < table.rows(); first += chunk) {
        const std::size_t rows = std::min(chunk, table.rows() - first);
        const nn::Matrix<float> x = Eigen::Map<const RowMajor>(table.values.data() + first * table.width(),
                                                               static_cast<Eigen::Index>(rows),
                                                               static_cast<Eigen::Index>(table.width()));
        sink(first, nn::predict(model, x));
    }
}

}  // namespace

std::vector<Point2> predict_positions(const nn::MlpModel<float>& model, const data::FeatureTable& table,
                                      std::size_t chunk) {
    if (model.head != nn::HeadKind::regression || model.output_dim() != 2)
        throw std::invalid_argument("predict_positions needs a 2-output regression model");
    std::vector<Point2> out(table.rows());
    for_chunks(model, table, chunk, [&](std::size_t first, const nn::Matrix<float>& y) {
        for (Eigen::Index r = 0; r < y.rows(); ++r)
            out[first + static_cast<std::size_t>(r)] = {static_cast<double>(y(r, 0)), static_cast<double>(y(r, 1))};
    });
    return out;
}

std::vector<int> predict_classes(const nn::MlpModel<float>& model, const data::FeatureTable& table,
                                 std::size_t chunk) {
    if (model.head != nn::HeadKind::classification)
        throw std::invalid_argument("predict_classes needs a classification model");
    std::vector<int> out(table.rows());
    for_chunks(model, table, chunk, [&](std::size_t first, const nn::Matrix<float>& y) {
        const auto cls = nn::argmax_rows(y);
        std::copy(cls.begin(), cls.end(), out.begin() + static_cast<std::ptrdiff_t>(first));
    });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
    return out;
}

config::Json summary_json(const ErrorSummary& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"rmse", s.rmse},
            {"median", s.median}, {"p90", s.p90}, {"max", s.max}};
}

config::Json histogram_json(const Histogram& h) {
    return {{"bin_width", h.bin_width}, {"max", h.max}, {"edges", h.edges},
            {"frequency", h.frequency}, {"overflow", h.overflow}};
}

}  // namespace

config::Json to_json(const LocalizationEval& ev) {
    config::Json regions = config::Json::array();
    for (const auto& r : ev.regions)
        regions.push_back({{"name", r.name},
                           {"region", config::to_json(r.region)},
                           {"inside", r.inside},
                           {"outside", r.outside},
                           {"raw", summary_json(r.raw)},
                           {"smoothed", summary_json(r.smoothed)}});
    return {{"samples", ev.truth.size()},
            {"raw", summary_json(ev.raw.summary)},
            {"smooth_window", ev.smooth_window},
            {"smoothed", summary_json(ev.smoothed_errors.summary)},
            {"histogram_raw", histogram_json(ev.hist_raw)},
            {"histogram_smoothed", histogram_json(ev.hist_smoothed)},
            {"regions", regions}};
}

config::Json to_json(const ClassificationEval& ev) {
    const auto& cm = ev.confusion;
    config::Json counts = config::Json::array(), fractions = config::Json::array();
    for (std::size_t r = 0; r < cm.n_classes; ++r) {
        config::Json crow = config::Json::array(), frow = config::Json::array();
        for (std::size_t c = 0; c < cm.n_classes; ++c) {
            crow.push_back(cm.count(r, c));
            frow.push_back(cm.fraction(r, c));
        }
        counts.push_back(crow);
        fractions.push_back(frow);
    }
    return {{"samples", ev.truth.size()},       {"n_classes", cm.n_classes},
            {"accuracy", cm.accuracy},          {"per_class_accuracy", cm.per_class_accuracy},
            {"class_totals", cm.class_totals}, {"counts", counts},
            {"fractions", fractions}};
}

void write_errors_csv(const LocalizationEval& ev, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "# csiloc errors v" << kCsvVersion << "\n";
    out << "index,timestamp,true_x,true_y,pred_x,pred_y,smooth_x,smooth_y,error,smoothed_error\n";
    for (std::size_t i = 0; i < ev.truth.size(); ++i)
        out << i << ',' << num(ev.timestamps[i]) << ',' << num(ev.truth[i][0]) << ',' << num(ev.truth[i][1]) << ','
            << num(ev.predicted[i][0]) << ',' << num(ev.predicted[i][1]) << ',' << num(ev.smoothed[i][0]) << ','
            << num(ev.smoothed[i][1]) << ',' << num(ev.raw.per_sample[i]) << ','
            << num(ev.smoothed_errors.per_sample[i]) << '\n';
}

void write_histogram_csv(const LocalizationEval& ev, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "# csiloc histogram v" << kCsvVersion << "\n";
    out << "bin_lo,bin_hi,frequency_raw,frequency_smoothed\n";
    const auto& a = ev.hist_raw;
    const auto& b = ev.hist_smoothed;
    for (std::size_t k = 0; k < a.frequency.size(); ++k)
        out << num(a.edges[k]) << ',' << num(a.edges[k + 1]) << ',' << num(a.frequency[k]) << ','
            << num(b.frequency[k]) << '\n';
    out << num(a.max) << ",inf," << num(a.overflow) << ',' << num(b.overflow) << '\n';
}

void write_loss_csv(std::span<const double> loss, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "# csiloc loss v" << kCsvVersion << "\n";
    out << "epoch,mean_loss\n";
    for (std::size_t i = 0; i < loss.size(); ++i) out << i + 1 << ',' << num(loss[i]) << '\n';
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "# csiloc confusion v" << kCsvVersion << "\n";
    out << "true_class,pred_class,count,fraction\n";
    for (std::size_t r = 0; r < cm.n_classes; ++r)
        for (std::size_t c = 0; c < cm.n_classes; ++c)
            out << r << ',' << c << ',' << cm.count(r, c) << ',' << num(cm.fraction(r, c)) << '\n';
}

void write_histogram_svg(const Histogram& raw, const Histogram& smoothed, const std::filesystem::path& path) {
    const double w = 640, h = 360, left = 50, bottom = 40, top = 20, right = 20;
    double peak = std::max(raw.overflow, smoothed.overflow);
    for (double f : raw.frequency) peak = std::max(peak, f);
    for (double f : smoothed.frequency) peak = std::max(peak, f);
    if (peak <= 0.0) peak = 1.0;
    const std::size_t bins = raw.frequency.size() + 1;
    const double bw = (w - left - right) / static_cast<double>(bins);
    const double ph = h - top - bottom;
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const auto bars = [&](const Histogram& hist, double offset, const char* color) {
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = k + 1 < bins ? hist.frequency[k] : hist.overflow;
            const double bh = f / peak * ph;
            out << "<rect x=\"" << left + static_cast<double>(k) * bw + offset << "\" y=\"" << top + ph - bh
                << "\" width=\"" << bw / 2 << "\" height=\"" << bh << "\" fill=\"" << color << "\"/>\n";
        }
    };
    bars(raw, 0.0, "#4c72b0");
    bars(smoothed, bw / 2, "#dd8452");
    out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << w - right << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left << "\" y=\"" << h - 10 << "\" font-size=\"12\">error [m], bin " << raw.bin_width
        << " m, last bar &gt; " << raw.max << " m; blue raw, orange smoothed; peak " << peak << "</text>\n";
    out << "</svg>\n";
}

void write_track_svg(const LocalizationEval& ev, const std::filesystem::path& path) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto* track : {&ev.truth, &ev.predicted, &ev.smoothed})
        for (const auto& p : *track) {
            x0 = std::min(x0, p[0]);
            x1 = std::max(x1, p[0]);
            y0 = std::min(y0, p[1]);
            y1 = std::max(y1, p[1]);
        }
    const double span = std::max({x1 - x0, y1 - y0, 1.0});
    const double size = 600, pad = 20;
    const auto sx = [&](double x) { return pad + (x - x0) / span * (size - 2 * pad); };
    const auto sy = [&](double y) { return size - pad - (y - y0) / span * (size - 2 * pad); };
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const std::size_t stride = std::max<std::size_t>(1, ev.predicted.size() / 2000);
    for (std::size_t i = 0; i < ev.predicted.size(); i += stride)
        out << "<circle cx=\"" << sx(ev.predicted[i][0]) << "\" cy=\"" << sy(ev.predicted[i][1])
            << "\" r=\"1\" fill=\"#999999\"/>\n";
    const auto line = [&](const std::vector<Point2>& pts, const char* color) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < pts.size(); i += stride) out << sx(pts[i][0]) << ',' << sy(pts[i][1]) << ' ';
        out << "\"/>\n";
    };
    line(ev.truth, "black");
    line(ev.smoothed, "#dd8452");
    out << "</svg>\n";
}

const ModelReport& EvalReport::model(const std::string& name) const {
    for (const auto& m : models)
        if (m.name == name) return m;
    throw std::out_of_range("report has no model named '" + name + "'");
}

double EvalReport::seconds(const std::string& stage) const {
    for (const auto& [name, s] : stage_seconds)
        if (name == stage) return s;
    return 0.0;
}

config::Json EvalReport::to_json() const {
    config::Json ms = config::Json::array();
    for (const auto& m : models) {
        config::Json j = {{"name", m.name}, {"train_rows", m.train_rows}, {"epochs", m.loss_history.size()}};
        if (!m.loss_history.empty()) j["final_loss"] = m.loss_history.back();
        if (m.localization) j["localization"] = eval::to_json(*m.localization);
        if (m.classification) j["classification"] = eval::to_json(*m.classification);
        ms.push_back(std::move(j));
    }
    return {{"schema_version", kReportSchemaVersion}, {"kind", kind}, {"manifest", manifest}, {"models", ms}};
}

void EvalReport::write(const std::filesystem::path& dir, bool svg) const {
    std::filesystem::create_directories(dir);
    open_out(dir / "report.json") << to_json().dump(2) << "\n";
    config::Json timing = config::Json::object();
    for (const auto& [name, s] : stage_seconds) timing[name] = s;
    open_out(dir / "timing.json") << timing.dump(2) << "\n";
    for (const auto& m : models) {
        if (!m.loss_history.empty()) write_loss_csv(m.loss_history, dir / (m.name + "_loss.csv"));
        if (m.localization) {
            write_errors_csv(*m.localization, dir / (m.name + "_errors.csv"));
            write_histogram_csv(*m.localization, dir / (m.name + "_histogram.csv"));
            if (svg) {
                write_histogram_svg(m.localization->hist_raw, m.localization->hist_smoothed,
                                    dir / (m.name + "_histogram.svg"));
                write_track_svg(*m.localization, dir / (m.name + "_track.svg"));
            }
        }
        if (m.classification) write_confusion_csv(m.classification->confusion, dir / (m.name + "_confusion.csv"));
    }
}

// ---------------------------------------------------------------------------

std::string kind_name(ExperimentConfig::Kind kind) {
    switch (kind) {
        case ExperimentConfig::Kind::localization: return "localization";
        case ExperimentConfig::Kind::hole: return "hole";
        case ExperimentConfig::Kind::floor: return "floor";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    scene.validate();
    if (kind == Kind::floor) {
        train_floors.validate();
        test_floors.validate();
        if (train_floors.n_floors != test_floors.n_floors)
            throw ConfigError("train_floors.n_floors and test_floors.n_floors differ");
        if (training.loss != nn::LossKind::cross_entropy)
            throw ConfigError("training.loss: floor experiments use cross_entropy");
    } else {
        train_trajectory.validate();
        test_trajectory.validate();
        if (training.loss != nn::LossKind::mse) throw ConfigError("training.loss: localization experiments use mse");
    }
    if (kind == Kind::hole && !hole) throw ConfigError("hole: required for hole experiments");
    if (hole) hole->validate();
    train_impairments.validate();
    test_impairments.validate();
    try {
        deltas.validate(scene.n_subcarriers, features::kDefaultMinAveraging);
    } catch (const std::out_of_range& e) {
        throw ConfigError(std::string("features.delays: ") + e.what());
    }
    if (!(floor_eps > 0.0)) throw ConfigError("features.floor_eps must be positive");
    try {
        training.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("training: ") + e.what());
    }
    if (eval.smooth_window < 1) throw ConfigError("evaluation.smooth_window must be >= 1");
    if (!(eval.hist_bin_width > 0.0) || !(eval.hist_max > 0.0))
        throw ConfigError("evaluation.hist_bin_width and hist_max must be positive");
}

config::Json ExperimentConfig::to_json() const {
    config::Json j = {{"schema_version", config::kSchemaVersion}, {"kind", kind_name(kind)},
                      {"scene", config::to_json(scene)}};
    if (kind == Kind::floor) {
        j["train_floors"] = config::to_json(train_floors);
        j["test_floors"] = config::to_json(test_floors);
    } else {
        j["train_trajectory"] = config::to_json(train_trajectory);
        j["test_trajectory"] = config::to_json(test_trajectory);
    }
    j["train_impairments"] = config::to_json(train_impairments);
    j["test_impairments"] = config::to_json(test_impairments);
    j["features"] = {{"delays", deltas.to_string()}, {"floor_eps", floor_eps}};
    j["training"] = config::to_json(training);
    j["model_seed"] = model_seed;
    if (hole) j["hole"] = config::to_json(*hole);
    config::Json regions = config::Json::object();
    for (const auto& r : eval.regions) regions[r.name] = config::to_json(r.region);
    j["evaluation"] = {{"smooth_window", eval.smooth_window},
                       {"hist_bin_width", eval.hist_bin_width},
                       {"hist_max", eval.hist_max},
                       {"regions", regions}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const config::Json& j) {
    config::Fields f(j, "");
    const auto version = f.count("schema_version");
    if (version != static_cast<std::uint64_t>(config::kSchemaVersion))
        throw ConfigError("schema_version: unsupported value " + std::to_string(version) + " (expected " +
                          std::to_string(config::kSchemaVersion) + ")");
    ExperimentConfig c;
    const auto kind = f.text("kind", "localization");
    if (kind == "localization")
        c.kind = Kind::localization;
    else if (kind == "hole")
        c.kind = Kind::hole;
    else if (kind == "floor")
        c.kind = Kind::floor;
    else
        throw ConfigError("kind: unknown experiment kind '" + kind + "' (localization, hole, floor)");

    c.scene = config::scene_from_json(f.raw("scene"), "scene");
    if (c.kind == Kind::floor) {
        c.train_floors = config::floors_from_json(f.raw("train_floors"), "train_floors");
        c.test_floors = config::floors_from_json(f.raw("test_floors"), "test_floors");
    } else {
        c.train_trajectory = config::trajectory_from_json(f.raw("train_trajectory"), "train_trajectory");
        c.test_trajectory = config::trajectory_from_json(f.raw("test_trajectory"), "test_trajectory");
    }
    c.train_impairments = f.has("train_impairments")
                              ? config::impairments_from_json(f.raw("train_impairments"), "train_impairments")
                              : config::impairments_from_json(config::Json::object(), "train_impairments");
    c.test_impairments = f.has("test_impairments")
                             ? config::impairments_from_json(f.raw("test_impairments"), "test_impairments")
                             : config::impairments_from_json(config::Json::object(), "test_impairments");
    if (f.has("features")) {
        auto ff = f.child("features");
        try {
            c.deltas = features::DelaySet::parse(ff.text("delays", "default"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("features.delays: ") + e.what());
        }
        c.floor_eps = ff.number("floor_eps", c.floor_eps);
        ff.finish();
    }
    config::Json training = f.has("training") ? f.raw("training") : config::Json::object();
    if (!training.is_object()) throw ConfigError("training: expected an object");
    if (!training.contains("loss")) training["loss"] = c.kind == Kind::floor ? "cross_entropy" : "mse";
    c.training = config::train_config_from_json(training, "training");
    c.model_seed = f.seed("model_seed");
    if (f.has("hole")) c.hole = config::region_from_json(f.raw("hole"), "hole");
    if (f.has("evaluation")) {
        auto ef = f.child("evaluation");
        c.eval.smooth_window = ef.count("smooth_window", c.eval.smooth_window);
        c.eval.hist_bin_width = ef.number("hist_bin_width", c.eval.hist_bin_width);
        c.eval.hist_max = ef.number("hist_max", c.eval.hist_max);
        if (ef.has("regions")) {
            const auto& regions = ef.raw("regions");
            if (!regions.is_object()) throw ConfigError("evaluation.regions: expected an object of name -> [x0,x1,y0,y1]");
            for (auto it = regions.begin(); it != regions.end(); ++it)
                c.eval.regions.push_back(
                    {it.key(), config::region_from_json(it.value(), "evaluation.regions." + it.key())});
        }
        ef.finish();
    }
    f.finish();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

namespace {

// Rethrows with the stage name prefixed, keeping the error class.
template <class F>
auto staged(EvalReport& report, const std::string& stage, const std::function<void(const std::string&)>& log, F&& fn) {
    if (log) log("stage " + stage);
    const auto t0 = std::chrono::steady_clock::now();
    const auto done = [&] {
        report.stage_seconds.emplace_back(
            stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            done();
        } else {
            auto r = fn();
            done();
            return r;
        }
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), stage + ": " + e.what(), e.record());
    } catch (const DegenerateGeometryError& e) {
        throw DegenerateGeometryError(stage + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(stage + ": " + e.what());
    } catch (const ContractViolation& e) {
        throw ContractViolation(stage + ": " + e.what());
    } catch (const std::out_of_range& e) {
        throw std::out_of_range(stage + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(stage + ": " + e.what());
    }
}

config::Json experiment_manifest(const ExperimentConfig& cfg) {
    return {{"tool", "csiloc"},
            {"tool_version", kToolVersion},
            {"recipe", cfg.to_json()},
            {"formats",
             {{"dataset", data::kDatasetVersion},
              {"feature_cache", data::kFeatureVersion},
              {"checkpoint", nn::kCheckpointVersion},
              {"report", kReportSchemaVersion},
              {"csv", kCsvVersion}}},
            {"conventions",
             {{"smoothing", "centered moving average, window truncated symmetrically at the edges"},
              {"autocorrelation", "magnitude of the mean over F - delta products"},
              {"training_precision", "float32"},
              {"regression_targets", "standardized by training-label mean and std through a fixed output affine"}}}};
}

ModelReport train_and_eval_localization(EvalReport& report, const std::string& name, const ExperimentConfig& cfg,
                                        const data::FeatureTable& train_tab, const data::FeatureTable& test_tab,
                                        const std::function<void(const std::string&)>& log) {
    ModelReport mr;
    mr.name = name;
    mr.train_rows = train_tab.rows();
    auto model = nn::build_regressor<float>(train_tab.width(), cfg.model_seed);
    staged(report, "train_" + name, log, [&] {
        const auto x = feature_matrix(train_tab);
        Eigen::MatrixXd y(static_cast<Eigen::Index>(train_tab.rows()), 2);
        for (std::size_t i = 0; i < train_tab.rows(); ++i) {
            y(static_cast<Eigen::Index>(i), 0) = train_tab.labels[i].position.x;
            y(static_cast<Eigen::Index>(i), 1) = train_tab.labels[i].position.y;
        }
        const auto res = nn::train<float>(model, x, nn::Targets{y}, cfg.training, nullptr, [&](const nn::EpochStats& s) {
            if (log)
                log("[" + name + "] epoch " + std::to_string(s.epoch) + "/" + std::to_string(cfg.training.epochs) +
                    " loss " + num(s.mean_loss) + " (" + num(std::round(s.seconds * 100) / 100) + " s)");
        });
        mr.loss_history = res.loss_history;
    });
    staged(report, "eval_" + name, log, [&] {
        const auto pred = predict_positions(model, test_tab);
        std::vector<Point2> truth;
        for (const auto& l : test_tab.labels) truth.push_back({l.position.x, l.position.y});
        const auto ts = test_tab.timestamps();
        auto settings = cfg.eval;
        if (cfg.hole && std::none_of(settings.regions.begin(), settings.regions.end(),
                                     [](const NamedRegion& r) { return r.name == "hole"; }))
            settings.regions.push_back({"hole", *cfg.hole});
        mr.localization = evaluate_localization(ts, truth, pred, settings);
    });
    return mr;
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& cfg, const std::function<void(const std::string&)>& log) {
    EvalReport report;
    report.kind = kind_name(cfg.kind);
    staged(report, "validate", log, [&] { cfg.validate(); });
    report.manifest = experiment_manifest(cfg);

    if (cfg.kind == ExperimentConfig::Kind::floor) {
        const auto train_tab = staged(report, "train_data", log, [&] {
            sim::SampleSource src(cfg.scene, cfg.train_floors, cfg.train_impairments);
            return data::to_feature_matrix(src, cfg.deltas, cfg.floor_eps);
        });
        const auto test_tab = staged(report, "test_data", log, [&] {
            sim::SampleSource src(cfg.scene, cfg.test_floors, cfg.test_impairments);
            return data::to_feature_matrix(src, cfg.deltas, cfg.floor_eps);
        });
        const std::size_t k = cfg.train_floors.n_floors;
        ModelReport mr;
        mr.name = "floor";
        mr.train_rows = train_tab.rows();
        auto model = nn::build_floor_classifier<float>(train_tab.width(), k, cfg.model_seed);
        staged(report, "train_floor", log, [&] {
            const auto res = nn::train<float>(model, feature_matrix(train_tab), nn::Targets{train_tab.floor_labels()},
                                              cfg.training, nullptr, [&](const nn::EpochStats& s) {
                                                  if (log)
                                                      log("[floor] epoch " + std::to_string(s.epoch) + "/" +
                                                          std::to_string(cfg.training.epochs) + " loss " +
                                                          num(s.mean_loss));
                                              });
            mr.loss_history = res.loss_history;
        });
        staged(report, "eval_floor", log, [&] {
            const auto pred = predict_classes(model, test_tab);
            mr.classification = evaluate_classification(test_tab.floor_labels(), pred, k);
        });
        report.models.push_back(std::move(mr));
        return report;
    }

    const auto train_tab = staged(report, "train_data", log, [&] {
        sim::SampleSource src(cfg.scene, cfg.train_trajectory, cfg.train_impairments);
        return data::to_feature_matrix(src, cfg.deltas, cfg.floor_eps);
    });
    const auto test_tab = staged(report, "test_data", log, [&] {
        sim::SampleSource src(cfg.scene, cfg.test_trajectory, cfg.test_impairments);
        return data::to_feature_matrix(src, cfg.deltas, cfg.floor_eps);
    });
    report.models.push_back(train_and_eval_localization(report, "full", cfg, train_tab, test_tab, log));
    if (cfg.kind == ExperimentConfig::Kind::hole) {
        const auto holed = staged(report, "cut_hole", log, [&] {
            const auto positions = train_tab.positions();
            const auto part = data::cut_hole(positions, *cfg.hole);
            if (part.outside.size() < 2) throw ConfigError("hole removes (almost) all training samples");
            return data::subset(train_tab, part.outside);
        });
        report.models.push_back(train_and_eval_localization(report, "holed", cfg, holed, test_tab, log));
    }
    return report;
}

}  // namespace csiloc::eval
