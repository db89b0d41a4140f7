// SPDX-License-Identifier: Apache-2.0
//
// Geometric single-bounce multipath generator for a uniform planar array,
// plus the common-phase / phase-ramp impairment model applied on top of it.
//
// Per path l the channel seen at element (m, n), polarization p and subcarrier
// f is
//   gamma_{l,p} * exp(j 2 pi (m dv sin(theta_l) + n dh cos(theta_l) sin(psi_l)))
//               * exp(-j 2 pi f df tau_l)
// where theta/psi are elevation/azimuth of the arrival direction in the array
// frame and tau_l = path length / c. gamma_{l,p} holds the 1/length amplitude,
// the carrier phase, the scatterer reflection gain and a 2x2 polarization
// mixing of the UE transmit polarization.

#pragma once

#include "csiloc/core.hpp"
#include "csiloc/sample.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace csiloc::sim {

using Rng = std::mt19937_64;

// Counter-based seeding: the stream for (seed, counter) does not depend on
// which thread generates it or in which order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream = 0);
Rng make_rng(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream = 0);

// Axis-aligned rectangle in the horizontal plane; edges are inside.
struct Rect {
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
    bool valid() const { return x_min < x_max && y_min < y_max; }
};

struct Scatterer {
    Position position;
    cplx gain{1.0, 0.0};
};

struct Scene {
    Position bs_position{0.0, -110.0, 25.0};
    double array_azimuth = kPi / 2.0;  // boresight heading, radians from +x
    double array_downtilt = 0.1;       // radians below the horizon
    ArrayGeometry geometry;
    double carrier_freq = 2.5e9;
    double subcarrier_spacing = 10e6 / 288.0;
    std::size_t n_subcarriers = 288;
    std::vector<Scatterer> scatterers;
    std::vector<Rect> los_blockage;
    Rect bounds{-100.0, 100.0, -100.0, 100.0};
    double ue_polarization = kPi / 4.0;  // UE transmit polarization angle
    double reflection_leakage = 0.3;     // cross-polar coupling of reflected paths
    double noise_std = 2e-4;             // per-entry complex noise standard deviation
    std::uint64_t seed = 1;

    void validate() const;

    // Placeholder campus: scatterers and LOS-blocking buildings drawn
    // uniformly in the bounds. None of these statistics come from measurements.
    static Scene random_campus(std::uint64_t seed, std::size_t n_scatterers = 12, std::size_t n_buildings = 4,
                               Rect bounds = {-100.0, 100.0, -100.0, 100.0});
};

// One propagation path as resolved by the generator; exposed for tests.
struct Path {
    double length = 0.0;               // meters
    std::array<double, 3> direction{};  // unit vector BS -> last interaction point, world frame
    std::array<cplx, 2> gain{};         // per polarization
};

std::vector<Path> trace_paths(const Scene& scene, const Position& ue);

// Noise-free channel.
CsiTensor synth_channel_clean(const Scene& scene, const Position& ue);

// Adds circular complex Gaussian noise with E|n|^2 = noise_std^2.
void add_noise(CsiTensor& csi, double noise_std, Rng& rng);

// Clean channel plus scene noise drawn from `rng`.
CsiTensor synth_channel(const Scene& scene, const Position& ue, Rng& rng);

// out = exp(j phi) exp(j alpha f) in.
CsiTensor apply_impairments(const CsiTensor& csi, const Impairments& imp);
void apply_impairments_inplace(CsiTensor& csi, const Impairments& imp);

struct ImpairmentProcess {
    enum class Mode { none, per_sample_random, random_walk };
    Mode mode = Mode::per_sample_random;
    double phi_std = 0.1;       // random-walk step of phi
    double alpha_range = kPi / 64.0;  // |alpha| bound
    double alpha_step = 1e-3;   // random-walk step of alpha
    std::uint64_t seed = 2;

    void validate() const;
    // Impairments for samples 0..count-1. per_sample_random draws are
    // counter-based; random_walk is a sequential walk reflected at +-alpha_range.
    std::vector<Impairments> draw(std::size_t count) const;
};

struct TrajectoryConfig {
    std::vector<Position> waypoints;
    double speed = 1.2;          // m/s
    double sample_rate = 200.0;  // Hz
    std::size_t max_samples = 0; // 0 = whole trajectory
    double start_time = 0.0;

    void validate() const;
    // Samples at t_i = i / rate for i = 0 .. floor(duration * rate), so both
    // endpoints are included: a 10 s path at 200 Hz yields 2001 samples.
    std::size_t sample_count() const;
    std::vector<std::pair<double, Position>> sample_positions() const;

    // Uniform random waypoints inside `area` at height `z`.
    static TrajectoryConfig random_walk(const Rect& area, std::size_t n_waypoints, double z, std::uint64_t seed);
};

struct FloorCapture {
    std::size_t n_floors = 6;
    double floor_height = 3.0;  // meters between consecutive floors
    double ground_z = 1.5;
    double x = 0.0, y = 0.0;
    double jitter = 0.5;        // horizontal jitter radius, meters
    double dwell = 60.0;        // seconds per floor
    double sample_rate = 200.0;
    std::uint64_t seed = 3;

    void validate() const;
    std::size_t samples_per_floor() const;
};

// Lazily generated dataset. sample(i) is a pure function of the configs and i,
// so generation can be parallelized and chunked freely.
class SampleSource {
public:
    // Trajectory-following dataset.
    SampleSource(Scene scene, const TrajectoryConfig& trajectory, ImpairmentProcess imp);
    // Floor-labelled captures at a fixed (x, y).
    SampleSource(Scene scene, const FloorCapture& floors, ImpairmentProcess imp);

    std::size_t size() const { return labels_.size(); }
    const Scene& scene() const { return scene_; }
    const ImpairmentProcess& impairment_process() const { return imp_; }

    double timestamp(std::size_t i) const { return labels_.at(i).first; }
    const Position& position(std::size_t i) const { return labels_.at(i).second; }
    const Impairments& impairments(std::size_t i) const { return imps_.at(i); }

    GeoTaggedSample sample(std::size_t i) const;
    // Noise stream used by sample(i).
    Rng noise_rng(std::size_t i) const;

    // Samples [first, first + count), generated in parallel.
    std::vector<GeoTaggedSample> batch(std::size_t first, std::size_t count) const;

private:
    Scene scene_;
    ImpairmentProcess imp_;
    std::vector<std::pair<double, Position>> labels_;
    std::vector<Impairments> imps_;
};

SampleSource generate_dataset(const Scene& scene, const TrajectoryConfig& trajectory, const ImpairmentProcess& imp);
SampleSource generate_floor_dataset(const Scene& scene, const FloorCapture& floors, const ImpairmentProcess& imp);

}  // namespace csiloc::sim
