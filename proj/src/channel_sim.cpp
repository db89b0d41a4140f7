// SPDX-License-Identifier: Apache-2.0

#include "csiloc/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csiloc/errors.hpp"

namespace csiloc::sim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kNoiseStream = 0x6E6F697365ULL;
constexpr std::uint64_t kImpairStream = 0x696D70ULL;
constexpr std::uint64_t kJitterStream = 0x6A6974ULL;

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 unit_from(const Position& from, const Position& to, double& length) {
    Vec3 d{to.x - from.x, to.y - from.y, to.z - from.z};
    length = std::sqrt(dot(d, d));
    if (length < 1e-9) return {0.0, 0.0, 0.0};
    return {d[0] / length, d[1] / length, d[2] / length};
}

struct ArrayFrame {
    Vec3 horizontal;
    Vec3 vertical;
};

ArrayFrame array_frame(const Scene& s) {
    const double ca = std::cos(s.array_azimuth), sa = std::sin(s.array_azimuth);
    const double ct = std::cos(s.array_downtilt), st = std::sin(s.array_downtilt);
    return {{-sa, ca, 0.0}, {ca * st, sa * st, ct}};
}

double reflect_into(double v, double bound) {
    // Fold v back into [-bound, bound].
    if (bound <= 0.0) return 0.0;
    const double period = 4.0 * bound;
    double u = std::fmod(v + bound, period);
    if (u < 0.0) u += period;
    return u <= 2.0 * bound ? u - bound : 3.0 * bound - u;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + counter);
}

Rng make_rng(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
    return Rng(mix_seed(seed, counter, stream));
}

void Scene::validate() const {
    geometry.validate();
    if (n_subcarriers < 2) throw ConfigError("scene.n_subcarriers must be >= 2");
    if (!(carrier_freq > 0.0)) throw ConfigError("scene.carrier_freq must be positive");
    if (!(subcarrier_spacing > 0.0)) throw ConfigError("scene.subcarrier_spacing must be positive");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("scene.noise_std must be >= 0");
    if (!bounds.valid()) throw ConfigError("scene.bounds must satisfy x_min < x_max and y_min < y_max");
    if (!bs_position.is_finite()) throw ConfigError("scene.bs_position must be finite");
    for (std::size_t i = 0; i < scatterers.size(); ++i) {
        const auto& sc = scatterers[i];
        if (!sc.position.is_finite() || !std::isfinite(sc.gain.real()) || !std::isfinite(sc.gain.imag()))
            throw ConfigError("scene.scatterers[" + std::to_string(i) + "] has non-finite fields");
    }
    for (std::size_t i = 0; i < los_blockage.size(); ++i)
        if (!los_blockage[i].valid())
            throw ConfigError("scene.los_blockage[" + std::to_string(i) + "] is not a valid rectangle");
}

Scene Scene::random_campus(std::uint64_t seed, std::size_t n_scatterers, std::size_t n_buildings, Rect bounds) {
    Scene s;
    s.seed = seed;
    s.bounds = bounds;
    s.bs_position = {0.5 * (bounds.x_min + bounds.x_max), bounds.y_min - 10.0, 25.0};
    auto rng = make_rng(seed, 0, 0x7363656E65ULL);
    std::uniform_real_distribution<double> ux(bounds.x_min, bounds.x_max), uy(bounds.y_min, bounds.y_max);
    std::uniform_real_distribution<double> uz(2.0, 15.0), umag(0.3, 1.0), uphase(0.0, kTwoPi);
    for (std::size_t i = 0; i < n_scatterers; ++i)
        s.scatterers.push_back({{ux(rng), uy(rng), uz(rng)}, std::polar(umag(rng), uphase(rng))});
    std::uniform_real_distribution<double> usize(15.0, 40.0);
    for (std::size_t i = 0; i < n_buildings; ++i) {
        const double cx = ux(rng), cy = uy(rng), w = usize(rng), h = usize(rng);
        s.los_blockage.push_back({cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2});
    }
    return s;
}

std::vector<Path> trace_paths(const Scene& scene, const Position& ue) {
    double bs_ue = 0.0;
    const Vec3 los_dir = unit_from(scene.bs_position, ue, bs_ue);
    if (bs_ue < 1e-9) throw DegenerateGeometryError("UE coincides with the base station");

    const double lambda = kSpeedOfLight / scene.carrier_freq;
    const double c_pol = std::cos(scene.ue_polarization), s_pol = std::sin(scene.ue_polarization);
    const auto path_gain = [&](double length, cplx reflection) {
        // 1/length amplitude (1 m reference) and carrier phase.
        const double cycles = std::fmod(length / lambda, 1.0);
        return reflection * std::polar(1.0 / length, -kTwoPi * cycles);
    };

    std::vector<Path> paths;
    paths.reserve(scene.scatterers.size() + 1);
    const bool blocked = std::any_of(scene.los_blockage.begin(), scene.los_blockage.end(),
                                     [&](const Rect& r) { return r.contains(ue.x, ue.y); });
    if (!blocked) {
        const cplx g = path_gain(bs_ue, {1.0, 0.0});
        paths.push_back({bs_ue, los_dir, {g * c_pol, g * s_pol}});
    }
    const double k = scene.reflection_leakage;
    const double knorm = 1.0 / std::sqrt(1.0 + k * k);
    for (const auto& sc : scene.scatterers) {
        double d1 = 0.0, d2 = 0.0;
        const Vec3 dir = unit_from(scene.bs_position, sc.position, d1);
        unit_from(sc.position, ue, d2);
        if (d1 < 1e-9 || d2 < 1e-9) throw DegenerateGeometryError("UE or base station coincides with a scatterer");
        const double length = d1 + d2;
        const cplx g = path_gain(length, sc.gain);
        // [[1, k], [-k, 1]] / sqrt(1 + k^2) applied to (cos, sin).
        paths.push_back({length, dir, {g * knorm * (c_pol + k * s_pol), g * knorm * (s_pol - k * c_pol)}});
    }
    return paths;
}

CsiTensor synth_channel_clean(const Scene& scene, const Position& ue) {
    if (!ue.is_finite() || !scene.bounds.contains(ue.x, ue.y))
        throw ConfigError("UE position (" + std::to_string(ue.x) + ", " + std::to_string(ue.y) +
                          ") is outside the scene bounds");
    const auto& g = scene.geometry;
    const std::size_t F = scene.n_subcarriers;
    CsiTensor csi(g, F);
    const ArrayFrame frame = array_frame(scene);
    std::vector<cplx> delay(F), steer(g.n_rows * g.n_cols);

    for (const Path& path : trace_paths(scene, ue)) {
        const double tau = path.length / kSpeedOfLight;
        const double step = -kTwoPi * scene.subcarrier_spacing * tau;
        for (std::size_t f = 0; f < F; ++f) delay[f] = std::polar(1.0, step * static_cast<double>(f));
        const double sin_el = dot(path.direction, frame.vertical);
        const double horiz = dot(path.direction, frame.horizontal);  // cos(el) sin(az)
        for (std::size_t m = 0; m < g.n_rows; ++m)
            for (std::size_t n = 0; n < g.n_cols; ++n) {
                const double phase = kTwoPi * (static_cast<double>(m) * g.spacing_v * sin_el +
                                               static_cast<double>(n) * g.spacing_h * horiz);
                steer[m * g.n_cols + n] = std::polar(1.0, phase);
            }
        for (std::size_t p = 0; p < g.n_pol; ++p)
            for (std::size_t m = 0; m < g.n_rows; ++m)
                for (std::size_t n = 0; n < g.n_cols; ++n) {
                    const cplx a = path.gain[p] * steer[m * g.n_cols + n];
                    auto dst = csi.plane(p, m, n);
                    for (std::size_t f = 0; f < F; ++f) dst[f] += a * delay[f];
                }
    }
    return csi;
}

void add_noise(CsiTensor& csi, double noise_std, Rng& rng) {
    if (noise_std <= 0.0) return;
    std::normal_distribution<double> nd(0.0, noise_std / std::sqrt(2.0));
    for (auto& c : csi.data()) {
        const double re = nd(rng);
        const double im = nd(rng);
        c += cplx{re, im};
    }
}

CsiTensor synth_channel(const Scene& scene, const Position& ue, Rng& rng) {
    auto csi = synth_channel_clean(scene, ue);
    add_noise(csi, scene.noise_std, rng);
    return csi;
}

void apply_impairments_inplace(CsiTensor& csi, const Impairments& imp) {
    if (!std::isfinite(imp.phi) || !std::isfinite(imp.alpha))
        throw std::invalid_argument("impairments must be finite");
    const std::size_t F = csi.n_subcarriers();
    std::vector<cplx> ramp(F);
    for (std::size_t f = 0; f < F; ++f) ramp[f] = std::polar(1.0, imp.phi + imp.alpha * static_cast<double>(f));
    const auto& g = csi.geometry();
    for (std::size_t p = 0; p < g.n_pol; ++p)
        for (std::size_t m = 0; m < g.n_rows; ++m)
            for (std::size_t n = 0; n < g.n_cols; ++n) {
                auto x = csi.plane(p, m, n);
                for (std::size_t f = 0; f < F; ++f) x[f] *= ramp[f];
            }
}

CsiTensor apply_impairments(const CsiTensor& csi, const Impairments& imp) {
    CsiTensor out = csi;
    apply_impairments_inplace(out, imp);
    return out;
}

void ImpairmentProcess::validate() const {
    if (!(phi_std >= 0.0) || !std::isfinite(phi_std)) throw ConfigError("impairments.phi_std must be >= 0");
    if (!(alpha_range >= 0.0) || alpha_range > kPi)
        throw ConfigError("impairments.alpha_range must lie in [0, pi] so the per-subcarrier ramp is unambiguous");
    if (!(alpha_step >= 0.0) || !std::isfinite(alpha_step)) throw ConfigError("impairments.alpha_step must be >= 0");
}

std::vector<Impairments> ImpairmentProcess::draw(std::size_t count) const {
    validate();
    std::vector<Impairments> out(count);
    switch (mode) {
        case Mode::none:
            break;
        case Mode::per_sample_random:
            for (std::size_t i = 0; i < count; ++i) {
                auto rng = make_rng(seed, i, kImpairStream);
                std::uniform_real_distribution<double> uphi(0.0, kTwoPi), ualpha(-alpha_range, alpha_range);
                const double phi = uphi(rng);
                out[i] = {phi, ualpha(rng)};
            }
            break;
        case Mode::random_walk: {
            auto rng = make_rng(seed, 0, kImpairStream);
            std::uniform_real_distribution<double> uphi(0.0, kTwoPi), ualpha(-alpha_range, alpha_range);
            std::normal_distribution<double> n01(0.0, 1.0);
            const double phi0 = uphi(rng);
            Impairments cur{phi0, ualpha(rng)};
            for (std::size_t i = 0; i < count; ++i) {
                out[i] = cur.canonical();
                const double dphi = n01(rng) * phi_std;
                const double dalpha = n01(rng) * alpha_step;
                cur.phi += dphi;
                cur.alpha = reflect_into(cur.alpha + dalpha, alpha_range);
            }
            break;
        }
    }
    return out;
}

void TrajectoryConfig::validate() const {
    if (waypoints.size() < 2) throw ConfigError("trajectory.waypoints needs at least 2 entries");
    if (!(speed > 0.0) || !std::isfinite(speed)) throw ConfigError("trajectory.speed must be positive");
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
        throw ConfigError("trajectory.sample_rate must be positive");
    for (std::size_t i = 0; i < waypoints.size(); ++i)
        if (!waypoints[i].is_finite())
            throw ConfigError("trajectory.waypoints[" + std::to_string(i) + "] is not finite");
}

std::size_t TrajectoryConfig::sample_count() const {
    validate();
    double length = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i) length += distance(waypoints[i - 1], waypoints[i]);
    const auto n = static_cast<std::size_t>(std::floor(length / speed * sample_rate + 1e-9)) + 1;
    return max_samples > 0 ? std::min(n, max_samples) : n;
}

std::vector<std::pair<double, Position>> TrajectoryConfig::sample_positions() const {
    const std::size_t n = sample_count();
    std::vector<std::pair<double, Position>> out;
    out.reserve(n);
    std::size_t seg = 0;
    double seg_start = 0.0;  // arc length at waypoint `seg`
    double seg_len = distance(waypoints[0], waypoints[1]);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double s = t * speed;
        while (s > seg_start + seg_len && seg + 2 < waypoints.size()) {
            seg_start += seg_len;
            ++seg;
            seg_len = distance(waypoints[seg], waypoints[seg + 1]);
        }
        const double u = seg_len > 0.0 ? std::clamp((s - seg_start) / seg_len, 0.0, 1.0) : 0.0;
        const auto& a = waypoints[seg];
        const auto& b = waypoints[seg + 1];
        Position p{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.z + u * (b.z - a.z), std::nullopt};
        out.emplace_back(start_time + t, p);
    }
    return out;
}

TrajectoryConfig TrajectoryConfig::random_walk(const Rect& area, std::size_t n_waypoints, double z,
                                               std::uint64_t seed) {
    TrajectoryConfig cfg;
    auto rng = make_rng(seed, 0, 0x77616C6BULL);
    std::uniform_real_distribution<double> ux(area.x_min, area.x_max), uy(area.y_min, area.y_max);
    for (std::size_t i = 0; i < n_waypoints; ++i) {
        const double x = ux(rng);
        cfg.waypoints.push_back({x, uy(rng), z, std::nullopt});
    }
    return cfg;
}

void FloorCapture::validate() const {
    if (n_floors < 2) throw ConfigError("floors.n_floors must be >= 2");
    if (!(floor_height > 0.0))
        throw DegenerateGeometryError("floors.floor_height must be positive; floors at identical height are degenerate");
    if (!(dwell > 0.0)) throw ConfigError("floors.dwell must be positive");
    if (!(sample_rate > 0.0)) throw ConfigError("floors.sample_rate must be positive");
    if (!(jitter >= 0.0)) throw ConfigError("floors.jitter must be >= 0");
}

std::size_t FloorCapture::samples_per_floor() const {
    validate();
    return static_cast<std::size_t>(std::llround(dwell * sample_rate));
}

SampleSource::SampleSource(Scene scene, const TrajectoryConfig& trajectory, ImpairmentProcess imp)
    : scene_(std::move(scene)), imp_(imp) {
    scene_.validate();
    labels_ = trajectory.sample_positions();
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (!scene_.bounds.contains(labels_[i].second.x, labels_[i].second.y))
            throw ConfigError("trajectory leaves the scene bounds at sample " + std::to_string(i));
    for (const auto& [t, pos] : labels_) trace_paths(scene_, pos);
    imps_ = imp_.draw(labels_.size());
}

SampleSource::SampleSource(Scene scene, const FloorCapture& floors, ImpairmentProcess imp)
    : scene_(std::move(scene)), imp_(imp) {
    scene_.validate();
    const std::size_t per_floor = floors.samples_per_floor();
    labels_.reserve(per_floor * floors.n_floors);
    std::uniform_real_distribution<double> uradius(0.0, 1.0), uangle(0.0, kTwoPi);
    for (std::size_t k = 0; k < floors.n_floors; ++k)
        for (std::size_t j = 0; j < per_floor; ++j) {
            const std::size_t i = k * per_floor + j;
            auto rng = make_rng(floors.seed, i, kJitterStream);
            const double r = floors.jitter * std::sqrt(uradius(rng));
            const double a = uangle(rng);
            Position p{floors.x + r * std::cos(a), floors.y + r * std::sin(a),
                       floors.ground_z + static_cast<double>(k) * floors.floor_height, static_cast<int>(k)};
            if (!scene_.bounds.contains(p.x, p.y))
                throw ConfigError("floor capture position is outside the scene bounds");
            trace_paths(scene_, p);
            labels_.emplace_back(static_cast<double>(i) / floors.sample_rate, p);
        }
    imps_ = imp_.draw(labels_.size());
}

GeoTaggedSample SampleSource::sample(std::size_t i) const {
    const auto& [t, pos] = labels_.at(i);
    CsiTensor csi = synth_channel_clean(scene_, pos);
    if (imp_.mode != ImpairmentProcess::Mode::none) apply_impairments_inplace(csi, imps_[i]);
    auto rng = noise_rng(i);
    add_noise(csi, scene_.noise_std, rng);
    return {t, pos, std::move(csi)};
}

Rng SampleSource::noise_rng(std::size_t i) const { return make_rng(scene_.seed, i, kNoiseStream); }

std::vector<GeoTaggedSample> SampleSource::batch(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw std::out_of_range("sample batch exceeds dataset size");
    std::vector<GeoTaggedSample> out(count);
    // Validation happens at construction; sample() cannot throw for in-range indices.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k)
        out[static_cast<std::size_t>(k)] = sample(first + static_cast<std::size_t>(k));
    return out;
}

SampleSource generate_dataset(const Scene& scene, const TrajectoryConfig& trajectory, const ImpairmentProcess& imp) {
    return SampleSource(scene, trajectory, imp);
}

SampleSource generate_floor_dataset(const Scene& scene, const FloorCapture& floors, const ImpairmentProcess& imp) {
    return SampleSource(scene, floors, imp);
}

}  // namespace csiloc::sim
