// SPDX-License-Identifier: Apache-2.0
//
// Impairment-invariant CSI features:
//   1. unitary 2D DFT over the array rows/columns (beam domain),
//   2. magnitude of the frequency autocorrelation at a set of subcarrier lags,
//   3. natural logarithm.
// The common phase offset cancels in h(f) h*(f+d) and the phase ramp leaves a
// unit-modulus factor exp(-j alpha d) that is constant over the averaged terms,
// so the features are exactly invariant to both impairments.

#pragma once

#include "csiloc/core.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace csiloc::features {

inline constexpr double kDefaultFloorEps = 1e-12;
inline constexpr std::size_t kDefaultMinAveraging = 16;

// Subcarrier lags at which the autocorrelation is sampled.
class DelaySet {
public:
    DelaySet() = default;
    explicit DelaySet(std::vector<std::size_t> deltas);

    // {0, 4, ..., 60}: lags up to 64 decimated by 4, sixteen values.
    static DelaySet standard();

    // "start:stop:step" (stop inclusive) or a comma-separated list "0,4,8".
    static DelaySet parse(const std::string& desc);

    // Checks the lags against a subcarrier count; throws std::out_of_range.
    void validate(std::size_t n_subcarriers, std::size_t min_averaging = kDefaultMinAveraging) const;

    std::span<const std::size_t> deltas() const { return deltas_; }
    std::size_t size() const { return deltas_.size(); }
    std::size_t max() const { return deltas_.empty() ? 0 : deltas_.back(); }
    std::string to_string() const;
    bool operator==(const DelaySet&) const = default;

private:
    std::vector<std::size_t> deltas_;
};

// Nonnegative real tensor over (p, z, a, delta), row-major in that order.
struct AutocorrTensor {
    ArrayGeometry geometry;
    std::size_t n_delays = 0;
    std::vector<double> values;
};

struct FeatureVector {
    std::vector<double> values;  // (p, z, a, delta) row-major
    std::size_t size() const { return values.size(); }
};

inline std::size_t feature_length(const ArrayGeometry& geom, const DelaySet& deltas) {
    return geom.n_antennas() * deltas.size();
}

BeamTensor beam_transform(const CsiTensor& csi);

// |(1/(F-d)) sum_{f=0}^{F-1-d} h(f) conj(h(f+d))| for each plane and lag.
AutocorrTensor freq_autocorr(const BeamTensor& beams, const DelaySet& deltas);

FeatureVector log_features(const AutocorrTensor& autocorr, double floor_eps = kDefaultFloorEps);

FeatureVector extract(const CsiTensor& csi, const DelaySet& deltas, double floor_eps = kDefaultFloorEps);

// Writes extract() of each tensor into consecutive rows of `out`
// (rows.size() * feature_length floats). Parallel over samples; the result does
// not depend on the thread count.
void extract_rows(std::span<const CsiTensor> csi, const DelaySet& deltas, double floor_eps, std::span<float> out);

}  // namespace csiloc::features
