// SPDX-License-Identifier: Apache-2.0
//
// Persistence and curation of geo-tagged CSI and feature caches.
// Byte-level layouts are documented in docs/FORMATS.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csiloc/channel_sim.hpp"
#include "csiloc/core.hpp"
#include "csiloc/features.hpp"
#include "csiloc/sample.hpp"

namespace csiloc::data {

inline constexpr char kDatasetMagic[8] = {'C', 'S', 'I', 'L', 'O', 'C', 'D', 'S'};
inline constexpr char kFeatureMagic[8] = {'C', 'S', 'I', 'L', 'O', 'C', 'F', 'C'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kFeatureVersion = 1;

// Header metadata of a dataset file.
struct DatasetInfo {
    ArrayGeometry geometry;
    std::size_t n_subcarriers = 288;
    std::array<double, 3> origin{0.0, 0.0, 0.0};  // local frame origin in the surveying system
    std::string manifest = "{}";                  // generator seeds and configs, JSON
};

// Streaming writer: records are appended one by one; the sample count and
// checksums are patched in on finish(). The destructor finishes if needed.
class DatasetWriter {
public:
    DatasetWriter(const std::filesystem::path& path, DatasetInfo info);
    ~DatasetWriter();
    DatasetWriter(const DatasetWriter&) = delete;
    DatasetWriter& operator=(const DatasetWriter&) = delete;

    void write(const GeoTaggedSample& sample);
    std::uint64_t finish();
    std::uint64_t count() const { return count_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    DatasetInfo info_;
    std::string header_;
    std::uint64_t count_ = 0;
    std::uint32_t record_crc_ = 0;
    std::vector<char> scratch_;
    bool finished_ = false;
    double last_timestamp_ = -std::numeric_limits<double>::infinity();
};

class DatasetReader {
public:
    explicit DatasetReader(const std::filesystem::path& path);

    const DatasetInfo& info() const { return info_; }
    std::uint64_t count() const { return count_; }
    std::uint64_t position() const { return next_; }

    // Next record, or nullopt after the last one (at which point the record
    // checksum has been verified).
    std::optional<GeoTaggedSample> next();

private:
    std::ifstream in_;
    std::filesystem::path path_;
    DatasetInfo info_;
    std::uint64_t count_ = 0;
    std::uint64_t next_ = 0;
    std::uint32_t record_crc_ = 0;
    std::size_t record_bytes_ = 0;
    std::vector<char> scratch_;
};

std::size_t dataset_record_bytes(const ArrayGeometry& geom, std::size_t n_subcarriers);

std::uint64_t write_dataset(std::span<const GeoTaggedSample> samples, const std::filesystem::path& path,
                            DatasetInfo info);
// Streams a generated dataset straight to disk in chunks.
std::uint64_t write_dataset(const sim::SampleSource& source, const std::filesystem::path& path, DatasetInfo info);
std::vector<GeoTaggedSample> read_dataset(const std::filesystem::path& path, DatasetInfo* info = nullptr);

// ---------------------------------------------------------------------------
// Splitting and hole cutting operate on index lists so they apply equally to
// raw samples and feature tables.

enum class SplitMode { random, temporal_prefix };

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// train gets round(n * train_fraction) samples. Both sides keep dataset order.
SplitIndices split(std::span<const double> timestamps, double train_fraction, double test_fraction,
                   std::uint64_t seed, SplitMode mode);

struct Region {
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    void validate() const;
    // Boundary points belong to the region.
    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
    static Region parse(const std::string& desc);  // "x0,x1,y0,y1"
};

struct HolePartition {
    std::vector<std::size_t> outside;
    std::vector<std::size_t> inside;
};

HolePartition cut_hole(std::span<const Position> positions, const Region& region);

template <class T>
std::vector<T> take(std::span<const T> items, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(items[i]);
    return out;
}

std::pair<std::vector<GeoTaggedSample>, std::vector<GeoTaggedSample>> cut_hole(
    std::span<const GeoTaggedSample> samples, const Region& region);

// ---------------------------------------------------------------------------
// Feature tables: one feature row per sample plus its label.

struct SampleLabel {
    double timestamp = 0.0;
    Position position;
};

struct FeatureTable {
    ArrayGeometry geometry;
    std::size_t n_subcarriers = 0;
    features::DelaySet deltas;
    double floor_eps = features::kDefaultFloorEps;
    std::size_t n_classes = 0;  // 0: position labels, otherwise floor labels in [0, n_classes)
    std::string manifest = "{}";
    std::vector<float> values;  // rows() x width(), row-major
    std::vector<SampleLabel> labels;

    std::size_t width() const { return features::feature_length(geometry, deltas); }
    std::size_t rows() const { return labels.size(); }
    std::span<const float> row(std::size_t i) const { return {values.data() + i * width(), width()}; }
    std::vector<Position> positions() const;
    std::vector<double> timestamps() const;
    std::vector<int> floor_labels() const;

    // Throws FormatError(geometry_mismatch) when layouts differ.
    void check_compatible(const FeatureTable& other) const;
};

FeatureTable subset(const FeatureTable& table, std::span<const std::size_t> idx);

// Row i = extract(csi_i). Rows preserve dataset order.
FeatureTable to_feature_matrix(std::span<const GeoTaggedSample> samples, const features::DelaySet& deltas,
                               double floor_eps = features::kDefaultFloorEps);
FeatureTable to_feature_matrix(const sim::SampleSource& source, const features::DelaySet& deltas,
                               double floor_eps = features::kDefaultFloorEps, std::size_t chunk = 256);
// `impair` re-impairs every sample with a fresh random (phi, alpha) drawn from
// `impair_seed` before extraction.
FeatureTable to_feature_matrix(DatasetReader& reader, const features::DelaySet& deltas,
                               double floor_eps = features::kDefaultFloorEps, bool impair = false,
                               std::uint64_t impair_seed = 0, std::size_t chunk = 256);

void write_feature_cache(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_cache(const std::filesystem::path& path);

}  // namespace csiloc::data
