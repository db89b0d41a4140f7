// SPDX-License-Identifier: Apache-2.0
//
// csiloc: command-line front end for the CSI fingerprinting pipeline.
// Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 config, 4 data format,
// 5 numerical failure.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "csiloc/config.hpp"
#include "csiloc/dataset.hpp"
#include "csiloc/errors.hpp"
#include "csiloc/eval.hpp"
#include "csiloc/nn.hpp"
#include "csiloc/selftest.hpp"
#include "csiloc/version.hpp"

using namespace csiloc;
namespace fs = std::filesystem;
using config::Json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kFormat = 4, kNumerical = 5 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything a subcommand needs to write its run manifest.
struct Manifest {
    std::string subcommand;
    Json config = Json::object();
    Json seeds = Json::object();
    Json inputs = Json::object();
    Json outputs = Json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Json to_json() const {
        return {{"tool", "csiloc"},
                {"tool_version", kToolVersion},
                {"subcommand", subcommand},
                {"config", config},
                {"seeds", seeds},
                {"inputs", inputs},
                {"outputs", outputs},
                {"formats",
                 {{"dataset", data::kDatasetVersion},
                  {"feature_cache", data::kFeatureVersion},
                  {"checkpoint", nn::kCheckpointVersion},
                  {"report", eval::kReportSchemaVersion},
                  {"csv", eval::kCsvVersion}}},
                {"wall_clock_seconds",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    }

    void write(const fs::path& path) const {
        std::ofstream out(path);
        out << to_json().dump(2) << '\n';
        if (!out) throw FormatError(FormatError::Kind::io, "cannot write manifest " + path.string());
    }
};

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void log_line(const std::string& s) { std::cerr << s << '\n'; }

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    std::string config, out;
    std::optional<std::size_t> max_samples;
};

int cmd_generate(const GenerateOpts& o) {
    Manifest man;
    man.subcommand = "generate";
    const Json j = config::load_json_file(o.config);
    config::Fields f(j, "");
    const auto version = f.count("schema_version");
    if (version != static_cast<std::uint64_t>(config::kSchemaVersion))
        throw ConfigError("schema_version: unsupported value " + std::to_string(version));
    const auto scene = config::scene_from_json(f.raw("scene"), "scene");
    const auto imp = f.has("impairments") ? config::impairments_from_json(f.raw("impairments"), "impairments")
                                          : config::impairments_from_json(Json::object(), "impairments");
    data::DatasetInfo info;
    info.geometry = scene.geometry;
    info.n_subcarriers = scene.n_subcarriers;
    if (f.has("origin")) {
        const auto& origin = f.raw("origin");
        if (!origin.is_array() || origin.size() != 3) throw ConfigError("origin: expected [x, y, z]");
        for (std::size_t k = 0; k < 3; ++k) {
            if (!origin[k].is_number()) throw ConfigError("origin: expected [x, y, z]");
            info.origin[k] = origin[k].get<double>();
        }
    }
    std::optional<sim::SampleSource> src;
    Json resolved = {{"schema_version", config::kSchemaVersion}, {"scene", config::to_json(scene)}};
    if (f.has("floors") == f.has("trajectory"))
        throw ConfigError("exactly one of 'trajectory' or 'floors' must be given");
    if (f.has("trajectory")) {
        auto traj = config::trajectory_from_json(f.raw("trajectory"), "trajectory");
        if (o.max_samples) traj.max_samples = *o.max_samples;
        resolved["trajectory"] = config::to_json(traj);
        src.emplace(scene, traj, imp);
    } else {
        const auto floors = config::floors_from_json(f.raw("floors"), "floors");
        resolved["floors"] = config::to_json(floors);
        man.seeds["floors"] = floors.seed;
        src.emplace(scene, floors, imp);
    }
    f.finish();
    resolved["impairments"] = config::to_json(imp);
    resolved["origin"] = info.origin;
    man.config = resolved;
    man.seeds["scene"] = scene.seed;
    man.seeds["impairments"] = imp.seed;
    man.inputs["config"] = o.config;
    man.outputs["dataset"] = o.out;
    info.manifest = resolved.dump();

    const auto n = data::write_dataset(*src, o.out, info);
    man.outputs["samples"] = n;
    man.write(manifest_path(o.out));
    log_line("wrote " + std::to_string(n) + " samples to " + o.out);
    return kOk;
}

// ---------------------------------------------------------------------------
// features

struct FeaturesOpts {
    std::string dataset, out, delays = "default", impair = "none";
    double floor_eps = features::kDefaultFloorEps;
    std::optional<std::uint64_t> impair_seed;
};

int cmd_features(const FeaturesOpts& o) {
    Manifest man;
    man.subcommand = "features";
    features::DelaySet deltas;
    try {
        deltas = features::DelaySet::parse(o.delays);
    } catch (const std::exception& e) {
        throw UsageError(std::string("--delays: ") + e.what());
    }
    if (!(o.floor_eps > 0.0)) throw UsageError("--floor-eps must be positive");
    const bool impair = o.impair == "random";
    std::uint64_t seed = 0;
    if (impair) seed = o.impair_seed ? *o.impair_seed : std::random_device{}();

    data::DatasetReader reader(o.dataset);
    try {
        deltas.validate(reader.info().n_subcarriers);
    } catch (const std::out_of_range& e) {
        throw FormatError(FormatError::Kind::geometry_mismatch, std::string("dataset ") + o.dataset + ": " + e.what());
    }
    auto table = data::to_feature_matrix(reader, deltas, o.floor_eps, impair, seed);
    man.config = {{"delays", deltas.to_string()}, {"floor_eps", o.floor_eps}, {"impair", o.impair}};
    if (impair) man.seeds["impair"] = seed;
    man.inputs["dataset"] = o.dataset;
    man.inputs["dataset_manifest"] = Json::parse(reader.info().manifest, nullptr, false);
    man.outputs["feature_cache"] = o.out;
    man.outputs["rows"] = table.rows();
    man.outputs["width"] = table.width();
    table.manifest = man.config.dump();
    data::write_feature_cache(table, o.out);
    man.write(manifest_path(o.out));
    log_line("wrote " + std::to_string(table.rows()) + " x " + std::to_string(table.width()) + " features to " + o.out);
    return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string features, kind = "regressor", config, resume, out, loss_csv;
    std::optional<std::size_t> epochs, batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed, model_seed;
};

int cmd_train(const TrainOpts& o) {
    Manifest man;
    man.subcommand = "train";
    if (o.epochs && *o.epochs == 0) throw UsageError("--epochs must be at least 1");
    if (o.batch_size && *o.batch_size < 2) throw UsageError("--batch-size must be at least 2");
    if (o.lr && !(*o.lr > 0.0)) throw UsageError("--lr must be positive");

    Json tj = o.config.empty() ? Json::object() : config::load_json_file(o.config);
    if (!tj.is_object()) throw ConfigError("training config: expected an object");
    if (!tj.contains("loss")) tj["loss"] = o.kind == "floor" ? "cross_entropy" : "mse";
    if (o.epochs) tj["epochs"] = *o.epochs;
    if (o.batch_size) tj["batch_size"] = *o.batch_size;
    if (o.lr) tj["lr"] = *o.lr;
    if (o.seed) tj["seed"] = *o.seed;
    const auto cfg = config::train_config_from_json(tj, "training");
    const bool floor = o.kind == "floor";
    if (floor != (cfg.loss == nn::LossKind::cross_entropy))
        throw ConfigError("training.loss: " + o.kind + " models require " + (floor ? "cross_entropy" : "mse"));

    const auto table = data::read_feature_cache(o.features);
    if (floor && table.n_classes == 0) throw FormatError(FormatError::Kind::geometry_mismatch, o.features + " has no floor labels");
    if (!floor && table.n_classes != 0)
        throw FormatError(FormatError::Kind::geometry_mismatch, o.features + " holds floor labels; use --kind floor");

    nn::MlpModel<float> model;
    std::optional<nn::AdamState<float>> adam;
    std::uint64_t model_seed = 0;
    if (!o.resume.empty()) {
        auto ck = nn::load_checkpoint<float>(o.resume);
        if (ck.model.input_dim() != table.width())
            throw FormatError(FormatError::Kind::architecture_mismatch,
                              "checkpoint input width " + std::to_string(ck.model.input_dim()) +
                                  " does not match feature width " + std::to_string(table.width()));
        model = std::move(ck.model);
        adam = std::move(ck.adam);
        man.inputs["resume"] = o.resume;
    } else {
        model_seed = o.model_seed ? *o.model_seed : std::random_device{}();
        model = floor ? nn::build_floor_classifier<float>(table.width(), table.n_classes, model_seed)
                      : nn::build_regressor<float>(table.width(), model_seed);
        man.seeds["model"] = model_seed;
    }
    man.seeds["training"] = cfg.seed;
    man.config = {{"kind", o.kind}, {"training", config::to_json(cfg)}};
    man.inputs["features"] = o.features;

    const auto x = eval::feature_matrix(table);
    nn::Targets targets;
    if (floor) {
        targets = table.floor_labels();
    } else {
        Eigen::MatrixXd y(static_cast<Eigen::Index>(table.rows()), 2);
        for (std::size_t i = 0; i < table.rows(); ++i) {
            y(static_cast<Eigen::Index>(i), 0) = table.labels[i].position.x;
            y(static_cast<Eigen::Index>(i), 1) = table.labels[i].position.y;
        }
        targets = std::move(y);
    }
    const auto res = nn::train<float>(model, x, targets, cfg, adam ? &*adam : nullptr, [&](const nn::EpochStats& s) {
        log_line("epoch " + std::to_string(s.epoch) + "/" + std::to_string(cfg.epochs) + " loss " +
                 std::to_string(s.mean_loss));
    });
    const std::string loss_csv = o.loss_csv.empty() ? o.out + ".loss.csv" : o.loss_csv;
    man.outputs["checkpoint"] = o.out;
    man.outputs["loss_csv"] = loss_csv;
    man.outputs["adam_step"] = res.adam.step;
    nn::save_checkpoint(o.out, model, &res.adam, man.config.dump());
    eval::write_loss_csv(res.loss_history, loss_csv);
    man.write(manifest_path(o.out));
    return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
    std::string model, features, out;
    std::size_t smooth_window = 2000;
    double hist_bin_width = 1.0, hist_max = 50.0;
    std::vector<std::string> regions;
    bool no_svg = false;
};

int cmd_evaluate(const EvaluateOpts& o) {
    Manifest man;
    man.subcommand = "evaluate";
    if (o.smooth_window == 0) throw UsageError("--smooth-window must be at least 1");
    if (!(o.hist_bin_width > 0.0) || !(o.hist_max > 0.0)) throw UsageError("histogram bin width and max must be positive");
    eval::EvalSettings settings;
    settings.smooth_window = o.smooth_window;
    settings.hist_bin_width = o.hist_bin_width;
    settings.hist_max = o.hist_max;
    for (std::size_t k = 0; k < o.regions.size(); ++k) {
        try {
            settings.regions.push_back({o.regions.size() == 1 ? "region" : "region" + std::to_string(k),
                                        data::Region::parse(o.regions[k])});
        } catch (const std::exception& e) {
            throw UsageError(std::string("--region: ") + e.what());
        }
    }

    const auto ck = nn::load_checkpoint<float>(o.model);
    const auto table = data::read_feature_cache(o.features);
    if (ck.model.input_dim() != table.width())
        throw FormatError(FormatError::Kind::geometry_mismatch,
                          "model expects " + std::to_string(ck.model.input_dim()) + " features but " + o.features +
                              " has rows of " + std::to_string(table.width()));

    eval::EvalReport report;
    report.kind = "evaluate";
    eval::ModelReport mr;
    mr.name = "model";
    if (ck.model.head == nn::HeadKind::classification) {
        if (table.n_classes == 0 || table.n_classes > ck.model.output_dim())
            throw FormatError(FormatError::Kind::geometry_mismatch,
                              "classifier with " + std::to_string(ck.model.output_dim()) + " classes cannot score " +
                                  o.features + " (" + std::to_string(table.n_classes) + " classes)");
        const auto pred = eval::predict_classes(ck.model, table);
        mr.classification = eval::evaluate_classification(table.floor_labels(), pred, ck.model.output_dim());
    } else {
        const auto pred = eval::predict_positions(ck.model, table);
        std::vector<eval::Point2> truth;
        for (const auto& l : table.labels) truth.push_back({l.position.x, l.position.y});
        const auto ts = table.timestamps();
        mr.localization = eval::evaluate_localization(ts, truth, pred, settings);
    }
    report.models.push_back(std::move(mr));

    man.config = {{"smooth_window", o.smooth_window},
                  {"hist_bin_width", o.hist_bin_width},
                  {"hist_max", o.hist_max},
                  {"regions", o.regions}};
    man.inputs["model"] = o.model;
    man.inputs["model_manifest"] = Json::parse(ck.manifest, nullptr, false);
    man.inputs["features"] = o.features;
    man.outputs["directory"] = o.out;
    report.manifest = man.config;
    fs::create_directories(o.out);
    report.write(o.out, !o.no_svg);
    man.write(fs::path(o.out) / "manifest.json");

    const auto& m = report.models.front();
    if (m.localization)
        std::printf("mean error %.3f m, smoothed %.3f m over %zu samples\n", m.localization->raw.summary.mean,
                    m.localization->smoothed_errors.summary.mean, m.localization->raw.summary.count);
    else
        std::printf("accuracy %.4f over %zu samples\n", m.classification->confusion.accuracy,
                    m.classification->truth.size());
    return kOk;
}

// ---------------------------------------------------------------------------
// experiment (end-to-end recipe) and selftest

int cmd_experiment(const std::string& recipe, const std::string& out, bool no_svg) {
    Manifest man;
    man.subcommand = "experiment";
    const auto cfg = eval::ExperimentConfig::from_json(config::load_json_file(recipe));
    const auto report = eval::run_experiment(cfg, log_line);
    man.config = cfg.to_json();
    man.inputs["recipe"] = recipe;
    man.outputs["directory"] = out;
    fs::create_directories(out);
    report.write(out, !no_svg);
    man.write(fs::path(out) / "manifest.json");
    for (const auto& m : report.models) {
        if (m.localization)
            std::printf("%s: mean error %.3f m, smoothed %.3f m\n", m.name.c_str(), m.localization->raw.summary.mean,
                        m.localization->smoothed_errors.summary.mean);
        if (m.classification) std::printf("%s: accuracy %.4f\n", m.name.c_str(), m.classification->confusion.accuracy);
    }
    return kOk;
}

int cmd_selftest(std::uint64_t seed) {
    bool ok = true;
    for (const auto& r : selftest::run_all(seed)) {
        std::printf("[%s] %-17s %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
        ok = ok && r.passed;
    }
    return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CSI fingerprinting localization pipeline"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

    GenerateOpts gen;
    auto* g = app.add_subcommand("generate", "Simulate a geo-tagged CSI dataset from a JSON config");
    g->add_option("-c,--config", gen.config, "Generator config (scene, trajectory or floors, impairments)")
        ->required()
        ->check(CLI::ExistingFile);
    g->add_option("-o,--out", gen.out, "Dataset file to write")->required();
    g->add_option("--max-samples", gen.max_samples, "Override trajectory.max_samples");

    FeaturesOpts feat;
    auto* f = app.add_subcommand("features", "Extract phase-invariant features from a dataset");
    f->add_option("-d,--dataset", feat.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
    f->add_option("-o,--out", feat.out, "Feature cache to write")->required();
    f->add_option("--delays", feat.delays, "Delay set: 'default', 'start:stop:step' or a comma list");
    f->add_option("--floor-eps", feat.floor_eps, "Lower clamp applied before the logarithm");
    f->add_option("--impair", feat.impair, "Apply fresh random impairments before extraction")
        ->check(CLI::IsMember({"none", "random"}));
    f->add_option("--impair-seed", feat.impair_seed, "Seed for --impair random (drawn from entropy if absent)");

    TrainOpts tr;
    auto* t = app.add_subcommand("train", "Train a regressor or floor classifier on a feature cache");
    t->add_option("-f,--features", tr.features, "Feature cache")->required()->check(CLI::ExistingFile);
    t->add_option("-o,--out", tr.out, "Checkpoint to write")->required();
    t->add_option("--kind", tr.kind, "Model kind")->check(CLI::IsMember({"regressor", "floor"}));
    t->add_option("-c,--config", tr.config, "Training config JSON (flags override its fields)")->check(CLI::ExistingFile);
    t->add_option("--epochs", tr.epochs, "Number of epochs");
    t->add_option("--batch-size", tr.batch_size, "Mini-batch size");
    t->add_option("--lr", tr.lr, "Adam learning rate");
    t->add_option("--seed", tr.seed, "Shuffling seed");
    t->add_option("--model-seed", tr.model_seed, "Weight initialization seed");
    t->add_option("--resume", tr.resume, "Continue from this checkpoint (weights and optimizer state)")
        ->check(CLI::ExistingFile);
    t->add_option("--loss-csv", tr.loss_csv, "Per-epoch loss CSV (default: <out>.loss.csv)");

    EvaluateOpts ev;
    auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a feature cache and write the report");
    e->add_option("-m,--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("-f,--features", ev.features, "Feature cache")->required()->check(CLI::ExistingFile);
    e->add_option("-o,--out", ev.out, "Output directory")->required();
    e->add_option("--smooth-window", ev.smooth_window, "Moving-average window in samples");
    e->add_option("--region", ev.regions, "Sub-report region x0,x1,y0,y1 (repeatable)");
    e->add_option("--hist-bin-width", ev.hist_bin_width, "Histogram bin width in meters");
    e->add_option("--hist-max", ev.hist_max, "Histogram upper edge in meters");
    e->add_flag("--no-svg", ev.no_svg, "Skip SVG plots");

    std::string recipe, exp_out;
    bool exp_no_svg = false;
    auto* x = app.add_subcommand("experiment", "Run an end-to-end recipe (generate, extract, train, evaluate)");
    x->add_option("-c,--config", recipe, "Experiment recipe JSON")->required()->check(CLI::ExistingFile);
    x->add_option("-o,--out", exp_out, "Output directory")->required();
    x->add_flag("--no-svg", exp_no_svg, "Skip SVG plots");

    std::uint64_t selftest_seed = 1;
    auto* s = app.add_subcommand("selftest", "Run the fast built-in consistency checks");
    s->add_option("--seed", selftest_seed, "Seed for the randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsage;
    }
    if (threads > 0) {
        omp_set_num_threads(threads);
        Eigen::setNbThreads(threads);
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*f) return cmd_features(feat);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_evaluate(ev);
        if (*x) return cmd_experiment(recipe, exp_out, exp_no_svg);
        if (*s) return cmd_selftest(selftest_seed);
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << '\n';
        return kUsage;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return kConfig;
    } catch (const FormatError& err) {
        std::cerr << "data format error: " << err.what() << '\n';
        return kFormat;
    } catch (const NumericalError& err) {
        std::cerr << "numerical failure: " << err.what() << '\n';
        return kNumerical;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
