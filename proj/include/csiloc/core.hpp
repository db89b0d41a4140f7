// SPDX-License-Identifier: Apache-2.0
//
// Shared domain types for CSI-based localization: array geometry, channel
// tensors, positions and the common impairment parameters.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csiloc {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;

// Rectangular dual-polarized panel. Element spacings are in wavelengths.
struct ArrayGeometry {
    std::size_t n_rows = 4;   // M, vertical
    std::size_t n_cols = 8;   // N, horizontal
    std::size_t n_pol = 2;    // P
    double spacing_v = 0.5;
    double spacing_h = 0.5;

    std::size_t n_antennas() const { return n_pol * n_rows * n_cols; }
    void validate() const;
    bool operator==(const ArrayGeometry&) const = default;
};

struct TensorIndex {
    std::size_t p = 0, m = 0, n = 0, f = 0;
    bool operator==(const TensorIndex&) const = default;
};

// Row-major linear index with axis precedence (p, m, n, f). Every on-disk
// layout and feature flattening in the project uses this order.
std::size_t flatten_index(const TensorIndex& idx, const ArrayGeometry& geom, std::size_t n_subcarriers);
TensorIndex unflatten_index(std::size_t linear, const ArrayGeometry& geom, std::size_t n_subcarriers);

// Complex field over (p, row, col, subcarrier). Used both for antenna-domain
// CSI and, after the spatial DFT, for beam-domain tensors where the two
// spatial axes are read as (zenith beam, azimuth beam).
class CsiTensor {
public:
    CsiTensor() = default;
    CsiTensor(const ArrayGeometry& geom, std::size_t n_subcarriers);
    CsiTensor(const ArrayGeometry& geom, std::size_t n_subcarriers, std::vector<cplx> data);

    const ArrayGeometry& geometry() const { return geom_; }
    std::size_t n_subcarriers() const { return n_sub_; }
    std::size_t size() const { return data_.size(); }

    cplx& operator()(std::size_t p, std::size_t m, std::size_t n, std::size_t f) {
        return data_[((p * geom_.n_rows + m) * geom_.n_cols + n) * n_sub_ + f];
    }
    const cplx& operator()(std::size_t p, std::size_t m, std::size_t n, std::size_t f) const {
        return data_[((p * geom_.n_rows + m) * geom_.n_cols + n) * n_sub_ + f];
    }

    // Contiguous subcarrier run of one (p, m, n) element.
    std::span<cplx> plane(std::size_t p, std::size_t m, std::size_t n) {
        return {data_.data() + ((p * geom_.n_rows + m) * geom_.n_cols + n) * n_sub_, n_sub_};
    }
    std::span<const cplx> plane(std::size_t p, std::size_t m, std::size_t n) const {
        return {data_.data() + ((p * geom_.n_rows + m) * geom_.n_cols + n) * n_sub_, n_sub_};
    }

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const CsiTensor& other) const {
        return geom_ == other.geom_ && n_sub_ == other.n_sub_;
    }
    bool operator==(const CsiTensor&) const = default;

private:
    ArrayGeometry geom_;
    std::size_t n_sub_ = 0;
    std::vector<cplx> data_;
};

// Beam-domain tensor: same layout, axes (p, z, a, f).
struct BeamTensor {
    CsiTensor beams;
};

// Local Cartesian coordinates in meters (x east, y north, z up).
struct Position {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::optional<int> floor_index;

    bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
    bool operator==(const Position&) const = default;
};

inline double distance(const Position& a, const Position& b) {
    return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

inline double distance_2d(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Common phase offset phi and phase-ramp slope alpha (radians per subcarrier).
struct Impairments {
    double phi = 0.0;
    double alpha = 0.0;

    // phi reduced to [0, 2*pi).
    Impairments canonical() const;
};

}  // namespace csiloc
