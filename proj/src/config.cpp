// SPDX-License-Identifier: Apache-2.0

#include "csiloc/config.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "csiloc/errors.hpp"

namespace csiloc::config {

namespace {

std::string type_name(const Json& j) { return j.type_name(); }

Json position_json(const Position& p) { return Json::array({p.x, p.y, p.z}); }

Position position_from(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3 || !std::all_of(j.begin(), j.end(), [](const Json& v) { return v.is_number(); }))
        throw ConfigError(path + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), std::nullopt};
}

Json rect_json(const sim::Rect& r) { return Json::array({r.x_min, r.x_max, r.y_min, r.y_max}); }

sim::Rect rect_from(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 4 || !std::all_of(j.begin(), j.end(), [](const Json& v) { return v.is_number(); }))
        throw ConfigError(path + ": expected [x_min, x_max, y_min, y_max]");
    sim::Rect r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!r.valid()) throw ConfigError(path + ": need x_min < x_max and y_min < y_max");
    return r;
}

}  // namespace

Json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(what + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error");
    }
}

Json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path.string());
}

// ---------------------------------------------------------------------------

Fields::Fields(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object, got " + type_name(obj_));
}

std::string Fields::path_of(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

bool Fields::has(const char* key) const { return obj_.contains(key); }

const Json& Fields::raw(const char* key) {
    if (!obj_.contains(key)) throw ConfigError(path_of(key) + ": missing required field");
    used_.emplace_back(key);
    return obj_.at(key);
}

double Fields::number(const char* key) {
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(path_of(key) + ": expected a number, got " + type_name(v));
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path_of(key) + ": must be finite");
    return d;
}

double Fields::number(const char* key, double fallback) { return has(key) ? number(key) : fallback; }

std::uint64_t Fields::count(const char* key) {
    const auto& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw ConfigError(path_of(key) + ": must be >= 0");
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(path_of(key) + ": expected a non-negative integer, got " + type_name(v));
}

std::uint64_t Fields::count(const char* key, std::uint64_t fallback) { return has(key) ? count(key) : fallback; }

std::uint64_t Fields::seed(const char* key) {
    if (has(key)) return count(key);
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string Fields::text(const char* key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(path_of(key) + ": expected a string, got " + type_name(v));
    return v.get<std::string>();
}

bool Fields::flag(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(path_of(key) + ": expected true/false, got " + type_name(v));
    return v.get<bool>();
}

Fields Fields::child(const char* key) { return Fields(raw(key), path_of(key)); }

void Fields::finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
        if (std::find(used_.begin(), used_.end(), it.key()) == used_.end())
            throw ConfigError(path_of(it.key().c_str()) + ": unknown field");
}

// ---------------------------------------------------------------------------

Json to_json(const ArrayGeometry& g) {
    return {{"n_rows", g.n_rows}, {"n_cols", g.n_cols}, {"n_pol", g.n_pol},
            {"spacing_v", g.spacing_v}, {"spacing_h", g.spacing_h}};
}

namespace {

ArrayGeometry geometry_from(const Json& j, const std::string& path) {
    Fields f(j, path);
    ArrayGeometry g;
    g.n_rows = f.count("n_rows", g.n_rows);
    g.n_cols = f.count("n_cols", g.n_cols);
    g.n_pol = f.count("n_pol", g.n_pol);
    g.spacing_v = f.number("spacing_v", g.spacing_v);
    g.spacing_h = f.number("spacing_h", g.spacing_h);
    f.finish();
    try {
        g.validate();
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return g;
}

}  // namespace

Json to_json(const sim::Scene& s) {
    Json scat = Json::array();
    for (const auto& sc : s.scatterers)
        scat.push_back({{"position", position_json(sc.position)}, {"gain", {sc.gain.real(), sc.gain.imag()}}});
    Json block = Json::array();
    for (const auto& r : s.los_blockage) block.push_back(rect_json(r));
    return {{"bs_position", position_json(s.bs_position)},
            {"array_azimuth", s.array_azimuth},
            {"array_downtilt", s.array_downtilt},
            {"geometry", to_json(s.geometry)},
            {"carrier_freq", s.carrier_freq},
            {"subcarrier_spacing", s.subcarrier_spacing},
            {"n_subcarriers", s.n_subcarriers},
            {"scatterers", scat},
            {"los_blockage", block},
            {"bounds", rect_json(s.bounds)},
            {"ue_polarization", s.ue_polarization},
            {"reflection_leakage", s.reflection_leakage},
            {"noise_std", s.noise_std},
            {"seed", s.seed}};
}

sim::Scene scene_from_json(const Json& j, const std::string& path) {
    Fields f(j, path);
    sim::Scene s;
    const std::string preset = f.text("preset", "");
    if (!preset.empty()) {
        if (preset != "random_campus")
            throw ConfigError(f.path_of("preset") + ": unknown preset '" + preset + "' (known: random_campus)");
        const auto bounds = f.has("bounds") ? rect_from(f.raw("bounds"), f.path_of("bounds")) : s.bounds;
        s = sim::Scene::random_campus(f.seed("seed"), f.count("n_scatterers", 12), f.count("n_buildings", 4), bounds);
    } else {
        if (f.has("n_scatterers") || f.has("n_buildings"))
            throw ConfigError(path + ": n_scatterers/n_buildings need \"preset\": \"random_campus\"");
        s.seed = f.seed("seed");
        if (f.has("bounds")) s.bounds = rect_from(f.raw("bounds"), f.path_of("bounds"));
        if (f.has("scatterers")) {
            const auto& arr = f.raw("scatterers");
            if (!arr.is_array()) throw ConfigError(f.path_of("scatterers") + ": expected an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string p = f.path_of("scatterers") + "[" + std::to_string(i) + "]";
                Fields sf(arr[i], p);
                sim::Scatterer sc;
                sc.position = position_from(sf.raw("position"), p + ".position");
                if (sf.has("gain")) {
                    const auto& g = sf.raw("gain");
                    if (!g.is_array() || g.size() != 2 || !g[0].is_number() || !g[1].is_number())
                        throw ConfigError(p + ".gain: expected [re, im]");
                    sc.gain = {g[0].get<double>(), g[1].get<double>()};
                }
                sf.finish();
                s.scatterers.push_back(sc);
            }
        }
        if (f.has("los_blockage")) {
            const auto& arr = f.raw("los_blockage");
            if (!arr.is_array()) throw ConfigError(f.path_of("los_blockage") + ": expected an array");
            for (std::size_t i = 0; i < arr.size(); ++i)
                s.los_blockage.push_back(rect_from(arr[i], f.path_of("los_blockage") + "[" + std::to_string(i) + "]"));
        }
    }
    if (f.has("bs_position")) s.bs_position = position_from(f.raw("bs_position"), f.path_of("bs_position"));
    s.array_azimuth = f.number("array_azimuth", s.array_azimuth);
    s.array_downtilt = f.number("array_downtilt", s.array_downtilt);
    if (f.has("geometry")) s.geometry = geometry_from(f.raw("geometry"), f.path_of("geometry"));
    s.carrier_freq = f.number("carrier_freq", s.carrier_freq);
    s.subcarrier_spacing = f.number("subcarrier_spacing", s.subcarrier_spacing);
    s.n_subcarriers = f.count("n_subcarriers", s.n_subcarriers);
    s.ue_polarization = f.number("ue_polarization", s.ue_polarization);
    s.reflection_leakage = f.number("reflection_leakage", s.reflection_leakage);
    s.noise_std = f.number("noise_std", s.noise_std);
    f.finish();
    s.validate();
    return s;
}

Json to_json(const sim::TrajectoryConfig& t) {
    Json wp = Json::array();
    for (const auto& p : t.waypoints) wp.push_back(position_json(p));
    return {{"waypoints", wp},
            {"speed", t.speed},
            {"sample_rate", t.sample_rate},
            {"max_samples", t.max_samples},
            {"start_time", t.start_time}};
}

sim::TrajectoryConfig trajectory_from_json(const Json& j, const std::string& path) {
    Fields f(j, path);
    sim::TrajectoryConfig t;
    if (f.has("random_walk")) {
        if (f.has("waypoints")) throw ConfigError(path + ": give either waypoints or random_walk, not both");
        auto rw = f.child("random_walk");
        const auto area = rect_from(rw.raw("area"), rw.path_of("area"));
        const auto n = rw.count("n_waypoints");
        const double z = rw.number("z", 1.5);
        t = sim::TrajectoryConfig::random_walk(area, n, z, rw.seed("seed"));
        rw.finish();
    } else {
        const auto& arr = f.raw("waypoints");
        if (!arr.is_array()) throw ConfigError(f.path_of("waypoints") + ": expected an array of [x, y, z]");
        for (std::size_t i = 0; i < arr.size(); ++i)
            t.waypoints.push_back(position_from(arr[i], f.path_of("waypoints") + "[" + std::to_string(i) + "]"));
    }
    t.speed = f.number("speed", t.speed);
    t.sample_rate = f.number("sample_rate", t.sample_rate);
    t.max_samples = f.count("max_samples", t.max_samples);
    t.start_time = f.number("start_time", t.start_time);
    f.finish();
    try {
        t.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return t;
}

Json to_json(const sim::ImpairmentProcess& imp) {
    const char* mode = imp.mode == sim::ImpairmentProcess::Mode::none               ? "none"
                       : imp.mode == sim::ImpairmentProcess::Mode::per_sample_random ? "per_sample_random"
                                                                                    : "random_walk";
    return {{"mode", mode},
            {"phi_std", imp.phi_std},
            {"alpha_range", imp.alpha_range},
            {"alpha_step", imp.alpha_step},
            {"seed", imp.seed}};
}

sim::ImpairmentProcess impairments_from_json(const Json& j, const std::string& path) {
    Fields f(j, path);
    sim::ImpairmentProcess imp;
    const auto mode = f.text("mode", "per_sample_random");
    if (mode == "none")
        imp.mode = sim::ImpairmentProcess::Mode::none;
    else if (mode == "per_sample_random")
        imp.mode = sim::ImpairmentProcess::Mode::per_sample_random;
    else if (mode == "random_walk")
        imp.mode = sim::ImpairmentProcess::Mode::random_walk;
    else
        throw ConfigError(f.path_of("mode") + ": unknown mode '" + mode +
                          "' (none, per_sample_random, random_walk)");
    imp.phi_std = f.number("phi_std", imp.phi_std);
    imp.alpha_range = f.number("alpha_range", imp.alpha_range);
    imp.alpha_step = f.number("alpha_step", imp.alpha_step);
    imp.seed = f.seed("seed");
    f.finish();
    try {
        imp.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return imp;
}

Json to_json(const sim::FloorCapture& c) {
    return {{"n_floors", c.n_floors}, {"floor_height", c.floor_height}, {"ground_z", c.ground_z},
            {"x", c.x},           {"y", c.y},                       {"jitter", c.jitter},
            {"dwell", c.dwell},   {"sample_rate", c.sample_rate},   {"seed", c.seed}};
}

sim::FloorCapture floors_from_json(const Json& j, const std::string& path) {
    Fields f(j, path);
    sim::FloorCapture c;
    c.n_floors = f.count("n_floors", c.n_floors);
    c.floor_height = f.number("floor_height", c.floor_height);
    c.ground_z = f.number("ground_z", c.ground_z);
    c.x = f.number("x", c.x);
    c.y = f.number("y", c.y);
    c.jitter = f.number("jitter", c.jitter);
    c.dwell = f.number("dwell", c.dwell);
    c.sample_rate = f.number("sample_rate", c.sample_rate);
    c.seed = f.seed("seed");
    f.finish();
    c.validate();
    return c;
}

Json to_json(const nn::TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"lr", t.lr},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"eps", t.eps},
            {"seed", t.seed},
            {"loss", t.loss == nn::LossKind::mse ? "mse" : "cross_entropy"},
            {"standardize_targets", t.standardize_targets}};
}

nn::TrainConfig train_config_from_json(const Json& j, const std::string& path) {
    Fields f(j, path);
    nn::TrainConfig t;
    t.epochs = f.count("epochs", t.epochs);
    t.batch_size = f.count("batch_size", t.batch_size);
    t.lr = f.number("lr", t.lr);
    t.beta1 = f.number("beta1", t.beta1);
    t.beta2 = f.number("beta2", t.beta2);
    t.eps = f.number("eps", t.eps);
    t.seed = f.seed("seed");
    const auto loss = f.text("loss", "mse");
    if (loss == "mse")
        t.loss = nn::LossKind::mse;
    else if (loss == "cross_entropy")
        t.loss = nn::LossKind::cross_entropy;
    else
        throw ConfigError(f.path_of("loss") + ": unknown loss '" + loss + "' (mse, cross_entropy)");
    t.standardize_targets = f.flag("standardize_targets", t.standardize_targets);
    f.finish();
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return t;
}

Json to_json(const data::Region& r) { return Json::array({r.x_min, r.x_max, r.y_min, r.y_max}); }

data::Region region_from_json(const Json& j, const std::string& path) {
    const auto r = rect_from(j, path);
    return {r.x_min, r.x_max, r.y_min, r.y_max};
}

}  // namespace csiloc::config
