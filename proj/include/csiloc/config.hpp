// SPDX-License-Identifier: Apache-2.0
//
// JSON <-> config struct conversion. Readers reject unknown fields and report
// problems as ConfigError with a dotted field path ("scene.noise_std: ...").
// Writers always emit the fully resolved form, so a written config reproduces
// the run exactly.

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "csiloc/channel_sim.hpp"
#include "csiloc/dataset.hpp"
#include "csiloc/nn.hpp"

namespace csiloc::config {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Parses a file; syntax errors name the line and column.
Json load_json_file(const std::filesystem::path& path);
Json parse_json_text(const std::string& text, const std::string& what);

// Strict field access over one JSON object.
class Fields {
public:
    Fields(const Json& obj, std::string path);

    bool has(const char* key) const;
    const Json& raw(const char* key);
    double number(const char* key);
    double number(const char* key, double fallback);
    std::uint64_t count(const char* key);
    std::uint64_t count(const char* key, std::uint64_t fallback);
    // Absent seeds are drawn from the OS entropy source; callers record the
    // resolved value.
    std::uint64_t seed(const char* key);
    std::string text(const char* key, const std::string& fallback);
    bool flag(const char* key, bool fallback);
    Fields child(const char* key);
    std::string path_of(const char* key) const;

    // Throws if the object has fields that were never read.
    void finish() const;

private:
    const Json& obj_;
    std::string path_;
    std::vector<std::string> used_;
};

Json to_json(const sim::Scene& scene);
sim::Scene scene_from_json(const Json& j, const std::string& path = "scene");

Json to_json(const sim::TrajectoryConfig& t);
// Accepts explicit "waypoints" or a "random_walk" block.
sim::TrajectoryConfig trajectory_from_json(const Json& j, const std::string& path = "trajectory");

Json to_json(const sim::ImpairmentProcess& imp);
sim::ImpairmentProcess impairments_from_json(const Json& j, const std::string& path = "impairments");

Json to_json(const sim::FloorCapture& f);
sim::FloorCapture floors_from_json(const Json& j, const std::string& path = "floors");

Json to_json(const nn::TrainConfig& t);
nn::TrainConfig train_config_from_json(const Json& j, const std::string& path = "training");

Json to_json(const data::Region& r);
data::Region region_from_json(const Json& j, const std::string& path);

Json to_json(const ArrayGeometry& g);

}  // namespace csiloc::config
