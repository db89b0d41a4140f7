// SPDX-License-Identifier: Apache-2.0

#include "csiloc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "csiloc/binary_io.hpp"
#include "csiloc/errors.hpp"

namespace csiloc::data {
namespace {

constexpr std::size_t kCountOffset = 48;
constexpr std::size_t kLabelBytes = 40;  // t, x, y, z (f64) + floor (i32) + reserved (u32)
constexpr std::size_t kTrailerBytes = 16;

std::string dataset_header(const DatasetInfo& info, std::uint64_t count) {
    io::ByteBuffer b;
    b.put_bytes({kDatasetMagic, 8});
    b.put(kDatasetVersion);
    b.put(static_cast<std::uint32_t>(info.geometry.n_pol));
    b.put(static_cast<std::uint32_t>(info.geometry.n_rows));
    b.put(static_cast<std::uint32_t>(info.geometry.n_cols));
    b.put(info.geometry.spacing_v);
    b.put(info.geometry.spacing_h);
    b.put(static_cast<std::uint32_t>(info.n_subcarriers));
    b.put(std::uint32_t{0});
    b.put(count);
    for (double o : info.origin) b.put(o);
    b.put_string(info.manifest);
    const auto crc = io::crc32(0, b.bytes().data(), b.bytes().size());
    b.put(crc);
    return b.bytes();
}

void put_label(char*& dst, double t, const Position& p) {
    const std::int32_t floor = p.floor_index.value_or(-1);
    const std::uint32_t reserved = 0;
    for (double v : {t, p.x, p.y, p.z}) {
        std::memcpy(dst, &v, 8);
        dst += 8;
    }
    std::memcpy(dst, &floor, 4);
    std::memcpy(dst + 4, &reserved, 4);
    dst += 8;
}

SampleLabel get_label(const char*& src) {
    double v[4];
    std::memcpy(v, src, 32);
    std::int32_t floor = 0;
    std::memcpy(&floor, src + 32, 4);
    src += kLabelBytes;
    SampleLabel l{v[0], {v[1], v[2], v[3], std::nullopt}};
    if (floor >= 0) l.position.floor_index = floor;
    return l;
}

std::uintmax_t file_size_or_throw(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw FormatError(FormatError::Kind::io, "cannot stat " + path.string() + ": " + ec.message());
    return size;
}

void check_magic(const std::string& magic, const char (&expected)[8], const std::filesystem::path& path) {
    if (magic != std::string_view(expected, 8))
        throw FormatError(FormatError::Kind::bad_magic, path.string() + ": bad magic bytes");
}

}  // namespace

std::size_t dataset_record_bytes(const ArrayGeometry& geom, std::size_t n_subcarriers) {
    return kLabelBytes + 2 * sizeof(float) * geom.n_antennas() * n_subcarriers;
}

// ---------------------------------------------------------------------------

DatasetWriter::DatasetWriter(const std::filesystem::path& path, DatasetInfo info)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), info_(std::move(info)) {
    if (!out_) throw FormatError(FormatError::Kind::io, "cannot open " + path.string() + " for writing");
    info_.geometry.validate();
    header_ = dataset_header(info_, 0);
    out_.write(header_.data(), static_cast<std::streamsize>(header_.size()));
    scratch_.resize(dataset_record_bytes(info_.geometry, info_.n_subcarriers));
}

DatasetWriter::~DatasetWriter() {
    if (!finished_) {
        try {
            finish();
        } catch (...) {
        }
    }
}

void DatasetWriter::write(const GeoTaggedSample& s) {
    if (finished_) throw ContractViolation("write after finish on " + path_.string());
    if (s.csi.geometry() != info_.geometry || s.csi.n_subcarriers() != info_.n_subcarriers)
        throw FormatError(FormatError::Kind::geometry_mismatch,
                          "sample " + std::to_string(count_) + " does not match the dataset geometry", count_);
    if (!(s.timestamp >= last_timestamp_) || !std::isfinite(s.timestamp) || !s.position.is_finite())
        throw std::invalid_argument("sample " + std::to_string(count_) +
                                    " has a non-finite field or a decreasing timestamp");
    last_timestamp_ = s.timestamp;
    char* dst = scratch_.data();
    put_label(dst, s.timestamp, s.position);
    for (const cplx& c : s.csi.data()) {
        const float re = static_cast<float>(c.real()), im = static_cast<float>(c.imag());
        std::memcpy(dst, &re, 4);
        std::memcpy(dst + 4, &im, 4);
        dst += 8;
    }
    record_crc_ = io::crc32(record_crc_, scratch_.data(), scratch_.size());
    out_.write(scratch_.data(), static_cast<std::streamsize>(scratch_.size()));
    if (!out_) throw FormatError(FormatError::Kind::io, "write failed on " + path_.string());
    ++count_;
}

std::uint64_t DatasetWriter::finish() {
    if (finished_) return count_;
    finished_ = true;
    io::ByteBuffer trailer;
    trailer.put(count_);
    trailer.put(record_crc_);
    trailer.put(std::uint32_t{0});
    out_.write(trailer.bytes().data(), static_cast<std::streamsize>(trailer.bytes().size()));
    header_ = dataset_header(info_, count_);
    out_.seekp(0);
    out_.write(header_.data(), static_cast<std::streamsize>(header_.size()));
    out_.close();
    if (!out_) throw FormatError(FormatError::Kind::io, "failed to finalize " + path_.string());
    return count_;
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
    const auto size = file_size_or_throw(path);
    io::Reader r(in_, path.string());
    r.start_crc();
    check_magic(r.get_bytes(8), kDatasetMagic, path);
    const auto version = r.get<std::uint32_t>();
    if (version != kDatasetVersion)
        throw FormatError(FormatError::Kind::version, path.string() + ": unsupported dataset version " +
                                                          std::to_string(version));
    info_.geometry.n_pol = r.get<std::uint32_t>();
    info_.geometry.n_rows = r.get<std::uint32_t>();
    info_.geometry.n_cols = r.get<std::uint32_t>();
    info_.geometry.spacing_v = r.get<double>();
    info_.geometry.spacing_h = r.get<double>();
    info_.n_subcarriers = r.get<std::uint32_t>();
    r.get<std::uint32_t>();
    count_ = r.get<std::uint64_t>();
    for (double& o : info_.origin) o = r.get<double>();
    info_.manifest = r.get_string();
    const auto computed = r.stop_crc();
    if (r.get<std::uint32_t>() != computed)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": header checksum mismatch");
    try {
        info_.geometry.validate();
        if (info_.n_subcarriers < 2) throw std::invalid_argument("fewer than 2 subcarriers");
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::geometry_mismatch, path.string() + ": invalid geometry: " + e.what());
    }

    record_bytes_ = dataset_record_bytes(info_.geometry, info_.n_subcarriers);
    const std::uintmax_t header = r.consumed();
    const std::uintmax_t expected = header + count_ * record_bytes_ + kTrailerBytes;
    if (size < expected) {
        const std::uint64_t record = size < header ? 0 : (size - header) / record_bytes_;
        if (record >= count_)
            throw FormatError(FormatError::Kind::truncated, path.string() + ": truncated trailer", record);
        throw FormatError(FormatError::Kind::truncated,
                          path.string() + ": file truncated in record " + std::to_string(record), record);
    }
    if (size > expected)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": trailing bytes after the last record");
    scratch_.resize(record_bytes_);
}

std::optional<GeoTaggedSample> DatasetReader::next() {
    if (next_ == count_) {
        if (next_ == count_ && record_bytes_ != 0) {
            io::Reader r(in_, path_.string());
            const auto n = r.get<std::uint64_t>();
            const auto crc = r.get<std::uint32_t>();
            record_bytes_ = 0;  // trailer consumed
            if (n != count_ || crc != record_crc_)
                throw FormatError(FormatError::Kind::corrupt, path_.string() + ": record checksum mismatch");
        }
        return std::nullopt;
    }
    in_.read(scratch_.data(), static_cast<std::streamsize>(scratch_.size()));
    if (static_cast<std::size_t>(in_.gcount()) != scratch_.size())
        throw FormatError(FormatError::Kind::truncated,
                          path_.string() + ": file truncated in record " + std::to_string(next_), next_);
    record_crc_ = io::crc32(record_crc_, scratch_.data(), scratch_.size());
    const char* src = scratch_.data();
    const SampleLabel label = get_label(src);
    std::vector<cplx> values(info_.geometry.n_antennas() * info_.n_subcarriers);
    for (auto& c : values) {
        float re = 0.0f, im = 0.0f;
        std::memcpy(&re, src, 4);
        std::memcpy(&im, src + 4, 4);
        src += 8;
        c = {re, im};
    }
    ++next_;
    try {
        return GeoTaggedSample{label.timestamp, label.position,
                               CsiTensor(info_.geometry, info_.n_subcarriers, std::move(values))};
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::corrupt,
                          path_.string() + ": record " + std::to_string(next_ - 1) + ": " + e.what(), next_ - 1);
    }
}

std::uint64_t write_dataset(std::span<const GeoTaggedSample> samples, const std::filesystem::path& path,
                            DatasetInfo info) {
    DatasetWriter w(path, std::move(info));
    for (const auto& s : samples) w.write(s);
    return w.finish();
}

std::uint64_t write_dataset(const sim::SampleSource& source, const std::filesystem::path& path, DatasetInfo info) {
    DatasetWriter w(path, std::move(info));
    constexpr std::size_t chunk = 128;
    for (std::size_t first = 0; first < source.size(); first += chunk)
        for (const auto& s : source.batch(first, std::min(chunk, source.size() - first))) w.write(s);
    return w.finish();
}

std::vector<GeoTaggedSample> read_dataset(const std::filesystem::path& path, DatasetInfo* info) {
    DatasetReader r(path);
    if (info) *info = r.info();
    std::vector<GeoTaggedSample> out;
    out.reserve(r.count());
    while (auto s = r.next()) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------

SplitIndices split(std::span<const double> timestamps, double train_fraction, double test_fraction,
                   std::uint64_t seed, SplitMode mode) {
    if (!(train_fraction > 0.0) || !(test_fraction > 0.0) || std::abs(train_fraction + test_fraction - 1.0) > 1e-9)
        throw ConfigError("split fractions must be positive and sum to 1");
    const std::size_t n = timestamps.size();
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train == n)
        throw ConfigError("split of " + std::to_string(n) + " samples leaves one side empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (mode == SplitMode::random) {
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
    } else {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });
    }
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

void Region::validate() const {
    if (!(x_min < x_max) || !(y_min < y_max))
        throw ConfigError("region must satisfy x_min < x_max and y_min < y_max");
}

Region Region::parse(const std::string& desc) {
    std::vector<double> v;
    std::stringstream ss(desc);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("region '" + desc + "': '" + item + "' is not a number");
        }
    }
    if (v.size() != 4) throw ConfigError("region '" + desc + "' must be x_min,x_max,y_min,y_max");
    Region r{v[0], v[1], v[2], v[3]};
    r.validate();
    return r;
}

HolePartition cut_hole(std::span<const Position> positions, const Region& region) {
    region.validate();
    HolePartition out;
    for (std::size_t i = 0; i < positions.size(); ++i)
        (region.contains(positions[i].x, positions[i].y) ? out.inside : out.outside).push_back(i);
    return out;
}

std::pair<std::vector<GeoTaggedSample>, std::vector<GeoTaggedSample>> cut_hole(
    std::span<const GeoTaggedSample> samples, const Region& region) {
    std::vector<Position> pos;
    pos.reserve(samples.size());
    for (const auto& s : samples) pos.push_back(s.position);
    const auto part = cut_hole(pos, region);
    return {take(samples, part.outside), take(samples, part.inside)};
}

// ---------------------------------------------------------------------------

std::vector<Position> FeatureTable::positions() const {
    std::vector<Position> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.position);
    return out;
}

std::vector<double> FeatureTable::timestamps() const {
    std::vector<double> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.timestamp);
    return out;
}

std::vector<int> FeatureTable::floor_labels() const {
    std::vector<int> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i].position.floor_index)
            throw ConfigError("sample " + std::to_string(i) + " has no floor label");
        out.push_back(*labels[i].position.floor_index);
    }
    return out;
}

void FeatureTable::check_compatible(const FeatureTable& other) const {
    if (geometry != other.geometry || n_subcarriers != other.n_subcarriers || !(deltas == other.deltas) ||
        floor_eps != other.floor_eps)
        throw FormatError(FormatError::Kind::geometry_mismatch,
                          "feature tables differ in geometry, subcarriers, delay set or floor_eps");
}

FeatureTable subset(const FeatureTable& table, std::span<const std::size_t> idx) {
    FeatureTable out = table;
    out.values.clear();
    out.labels.clear();
    const std::size_t w = table.width();
    out.values.reserve(idx.size() * w);
    out.labels.reserve(idx.size());
    for (auto i : idx) {
        const auto r = table.row(i);
        out.values.insert(out.values.end(), r.begin(), r.end());
        out.labels.push_back(table.labels[i]);
    }
    return out;
}

namespace {

FeatureTable empty_table(const ArrayGeometry& geom, std::size_t n_sub, const features::DelaySet& deltas,
                         double floor_eps) {
    deltas.validate(n_sub, 1);
    FeatureTable t;
    t.geometry = geom;
    t.n_subcarriers = n_sub;
    t.deltas = deltas;
    t.floor_eps = floor_eps;
    return t;
}

void append_rows(FeatureTable& t, std::span<const GeoTaggedSample> chunk) {
    std::vector<CsiTensor> csi;
    csi.reserve(chunk.size());
    for (const auto& s : chunk) {
        if (s.csi.geometry() != t.geometry || s.csi.n_subcarriers() != t.n_subcarriers)
            throw FormatError(FormatError::Kind::geometry_mismatch, "sample geometry differs from the feature table");
        csi.push_back(s.csi);
        t.labels.push_back({s.timestamp, s.position});
    }
    const std::size_t old = t.values.size();
    t.values.resize(old + chunk.size() * t.width());
    features::extract_rows(csi, t.deltas, t.floor_eps, std::span<float>(t.values).subspan(old));
}

void infer_classes(FeatureTable& t) {
    int max_floor = -1;
    bool all = !t.labels.empty();
    for (const auto& l : t.labels) {
        if (!l.position.floor_index) {
            all = false;
            break;
        }
        max_floor = std::max(max_floor, *l.position.floor_index);
    }
    t.n_classes = all ? static_cast<std::size_t>(max_floor + 1) : 0;
}

}  // namespace

FeatureTable to_feature_matrix(std::span<const GeoTaggedSample> samples, const features::DelaySet& deltas,
                               double floor_eps) {
    if (samples.empty()) throw ConfigError("cannot build a feature matrix from an empty dataset");
    auto t = empty_table(samples.front().csi.geometry(), samples.front().csi.n_subcarriers(), deltas, floor_eps);
    t.values.reserve(samples.size() * t.width());
    append_rows(t, samples);
    infer_classes(t);
    return t;
}

FeatureTable to_feature_matrix(const sim::SampleSource& source, const features::DelaySet& deltas, double floor_eps,
                               std::size_t chunk) {
    if (source.size() == 0) throw ConfigError("cannot build a feature matrix from an empty dataset");
    const auto& scene = source.scene();
    auto t = empty_table(scene.geometry, scene.n_subcarriers, deltas, floor_eps);
    t.values.reserve(source.size() * t.width());
    for (std::size_t first = 0; first < source.size(); first += chunk) {
        const auto batch = source.batch(first, std::min(chunk, source.size() - first));
        append_rows(t, batch);
    }
    infer_classes(t);
    return t;
}

FeatureTable to_feature_matrix(DatasetReader& reader, const features::DelaySet& deltas, double floor_eps,
                               bool impair, std::uint64_t impair_seed, std::size_t chunk) {
    if (reader.count() == 0) throw ConfigError("cannot build a feature matrix from an empty dataset");
    auto t = empty_table(reader.info().geometry, reader.info().n_subcarriers, deltas, floor_eps);
    t.manifest = reader.info().manifest;
    t.values.reserve(reader.count() * t.width());
    sim::ImpairmentProcess fresh;
    fresh.mode = sim::ImpairmentProcess::Mode::per_sample_random;
    fresh.seed = impair_seed;
    const auto imps = impair ? fresh.draw(reader.count()) : std::vector<Impairments>{};
    std::vector<GeoTaggedSample> buf;
    std::size_t index = 0;
    while (true) {
        auto s = reader.next();
        if (s) {
            if (impair) sim::apply_impairments_inplace(s->csi, imps[index]);
            ++index;
            buf.push_back(std::move(*s));
        }
        if (buf.size() == chunk || (!s && !buf.empty())) {
            append_rows(t, buf);
            buf.clear();
        }
        if (!s) break;
    }
    infer_classes(t);
    return t;
}

// ---------------------------------------------------------------------------

namespace {

std::string feature_header(const FeatureTable& t) {
    io::ByteBuffer b;
    b.put_bytes({kFeatureMagic, 8});
    b.put(kFeatureVersion);
    b.put(static_cast<std::uint32_t>(t.geometry.n_pol));
    b.put(static_cast<std::uint32_t>(t.geometry.n_rows));
    b.put(static_cast<std::uint32_t>(t.geometry.n_cols));
    b.put(t.geometry.spacing_v);
    b.put(t.geometry.spacing_h);
    b.put(static_cast<std::uint32_t>(t.n_subcarriers));
    b.put(static_cast<std::uint32_t>(t.deltas.size()));
    for (auto d : t.deltas.deltas()) b.put(static_cast<std::uint32_t>(d));
    b.put(t.floor_eps);
    b.put(std::uint32_t{1});  // normalization tag: 1/(F - delta)
    b.put(static_cast<std::uint32_t>(t.n_classes));
    b.put(static_cast<std::uint64_t>(t.rows()));
    b.put_string(t.manifest);
    const auto crc = io::crc32(0, b.bytes().data(), b.bytes().size());
    b.put(crc);
    return b.bytes();
}

}  // namespace

void write_feature_cache(const FeatureTable& t, const std::filesystem::path& path) {
    if (t.values.size() != t.rows() * t.width())
        throw std::invalid_argument("feature table values do not match rows x width");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot open " + path.string() + " for writing");
    const auto header = feature_header(t);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<char> rec(kLabelBytes + t.width() * sizeof(float));
    std::uint32_t crc = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        char* dst = rec.data();
        put_label(dst, t.labels[i].timestamp, t.labels[i].position);
        std::memcpy(dst, t.row(i).data(), t.width() * sizeof(float));
        crc = io::crc32(crc, rec.data(), rec.size());
        out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
    io::ByteBuffer trailer;
    trailer.put(static_cast<std::uint64_t>(t.rows()));
    trailer.put(crc);
    trailer.put(std::uint32_t{0});
    out.write(trailer.bytes().data(), static_cast<std::streamsize>(trailer.bytes().size()));
    if (!out) throw FormatError(FormatError::Kind::io, "write failed on " + path.string());
}

FeatureTable read_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
    const auto size = file_size_or_throw(path);
    io::Reader r(in, path.string());
    r.start_crc();
    check_magic(r.get_bytes(8), kFeatureMagic, path);
    const auto version = r.get<std::uint32_t>();
    if (version != kFeatureVersion)
        throw FormatError(FormatError::Kind::version,
                          path.string() + ": unsupported feature cache version " + std::to_string(version));
    FeatureTable t;
    t.geometry.n_pol = r.get<std::uint32_t>();
    t.geometry.n_rows = r.get<std::uint32_t>();
    t.geometry.n_cols = r.get<std::uint32_t>();
    t.geometry.spacing_v = r.get<double>();
    t.geometry.spacing_h = r.get<double>();
    t.n_subcarriers = r.get<std::uint32_t>();
    const auto n_delays = r.get<std::uint32_t>();
    if (n_delays == 0 || n_delays > 65536)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": implausible delay count");
    std::vector<std::size_t> d(n_delays);
    for (auto& v : d) v = r.get<std::uint32_t>();
    t.floor_eps = r.get<double>();
    const auto norm = r.get<std::uint32_t>();
    t.n_classes = r.get<std::uint32_t>();
    const auto rows = r.get<std::uint64_t>();
    t.manifest = r.get_string();
    const auto computed = r.stop_crc();
    if (r.get<std::uint32_t>() != computed)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": header checksum mismatch");
    if (norm != 1)
        throw FormatError(FormatError::Kind::version, path.string() + ": unknown autocorrelation normalization");
    try {
        t.geometry.validate();
        t.deltas = features::DelaySet(std::move(d));
        t.deltas.validate(t.n_subcarriers, 1);
    } catch (const std::exception& e) {
        throw FormatError(FormatError::Kind::geometry_mismatch, path.string() + ": " + e.what());
    }

    const std::size_t rec_bytes = kLabelBytes + t.width() * sizeof(float);
    const std::uintmax_t header = r.consumed();
    const std::uintmax_t expected = header + rows * rec_bytes + kTrailerBytes;
    if (size < expected) {
        const std::uint64_t record = size < header ? 0 : (size - header) / rec_bytes;
        throw FormatError(FormatError::Kind::truncated,
                          path.string() + ": file truncated in record " + std::to_string(record), record);
    }
    if (size > expected)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": trailing bytes after the last record");

    t.values.resize(rows * t.width());
    t.labels.resize(rows);
    std::vector<char> rec(rec_bytes);
    std::uint32_t crc = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        in.read(rec.data(), static_cast<std::streamsize>(rec.size()));
        crc = io::crc32(crc, rec.data(), rec.size());
        const char* src = rec.data();
        t.labels[i] = get_label(src);
        std::memcpy(t.values.data() + i * t.width(), src, t.width() * sizeof(float));
    }
    const auto n_trailer = r.get<std::uint64_t>();
    const auto crc_trailer = r.get<std::uint32_t>();
    if (n_trailer != rows || crc_trailer != crc)
        throw FormatError(FormatError::Kind::corrupt, path.string() + ": record checksum mismatch");
    return t;
}

}  // namespace csiloc::data
