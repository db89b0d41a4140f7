// SPDX-License-Identifier: Apache-2.0

#include "csiloc/core.hpp"

#include <algorithm>
#include <string>

namespace csiloc {

void ArrayGeometry::validate() const {
    if (n_rows < 1 || n_cols < 1)
        throw std::invalid_argument("array geometry needs at least one row and one column");
    if (n_pol != 2)
        throw std::invalid_argument("array geometry must have exactly 2 polarizations, got " + std::to_string(n_pol));
    if (!(spacing_v > 0.0) || !(spacing_h > 0.0) || !std::isfinite(spacing_v) || !std::isfinite(spacing_h))
        throw std::invalid_argument("element spacing must be positive and finite");
}

std::size_t flatten_index(const TensorIndex& idx, const ArrayGeometry& geom, std::size_t n_subcarriers) {
    if (idx.p >= geom.n_pol || idx.m >= geom.n_rows || idx.n >= geom.n_cols || idx.f >= n_subcarriers)
        throw std::out_of_range("tensor index (" + std::to_string(idx.p) + "," + std::to_string(idx.m) + "," +
                                std::to_string(idx.n) + "," + std::to_string(idx.f) + ") out of bounds");
    return ((idx.p * geom.n_rows + idx.m) * geom.n_cols + idx.n) * n_subcarriers + idx.f;
}

TensorIndex unflatten_index(std::size_t linear, const ArrayGeometry& geom, std::size_t n_subcarriers) {
    const std::size_t total = geom.n_antennas() * n_subcarriers;
    if (linear >= total)
        throw std::out_of_range("linear index " + std::to_string(linear) + " >= " + std::to_string(total));
    TensorIndex idx;
    idx.f = linear % n_subcarriers;
    linear /= n_subcarriers;
    idx.n = linear % geom.n_cols;
    linear /= geom.n_cols;
    idx.m = linear % geom.n_rows;
    idx.p = linear / geom.n_rows;
    return idx;
}

CsiTensor::CsiTensor(const ArrayGeometry& geom, std::size_t n_subcarriers)
    : geom_(geom), n_sub_(n_subcarriers) {
    geom_.validate();
    if (n_subcarriers < 2)
        throw std::invalid_argument("CSI tensor needs at least 2 subcarriers");
    data_.assign(geom_.n_antennas() * n_sub_, cplx{0.0, 0.0});
}

CsiTensor::CsiTensor(const ArrayGeometry& geom, std::size_t n_subcarriers, std::vector<cplx> data)
    : geom_(geom), n_sub_(n_subcarriers), data_(std::move(data)) {
    geom_.validate();
    if (n_subcarriers < 2)
        throw std::invalid_argument("CSI tensor needs at least 2 subcarriers");
    if (data_.size() != geom_.n_antennas() * n_sub_)
        throw std::invalid_argument("CSI data length " + std::to_string(data_.size()) + " does not match shape " +
                                    std::to_string(geom_.n_antennas() * n_sub_));
    if (!all_finite())
        throw std::invalid_argument("CSI tensor contains non-finite entries");
}

bool CsiTensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
}

Impairments Impairments::canonical() const {
    double p = std::fmod(phi, kTwoPi);
    if (p < 0.0) p += kTwoPi;
    if (p >= kTwoPi) p = 0.0;
    return {p, alpha};
}

}  // namespace csiloc
