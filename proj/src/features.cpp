// SPDX-License-Identifier: Apache-2.0

#include "csiloc/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "csiloc/errors.hpp"

namespace csiloc::features {
namespace {

// Unitary DFT matrix, row k holds exp(-j 2 pi k m / size) / sqrt(size).
std::vector<cplx> dft_matrix(std::size_t size) {
    std::vector<cplx> w(size * size);
    const double norm = 1.0 / std::sqrt(static_cast<double>(size));
    for (std::size_t k = 0; k < size; ++k)
        for (std::size_t m = 0; m < size; ++m) {
            const double angle = -kTwoPi * static_cast<double>((k * m) % size) / static_cast<double>(size);
            w[k * size + m] = std::polar(norm, angle);
        }
    return w;
}

std::size_t parse_count(std::string_view text, const std::string& desc) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw std::invalid_argument("bad delay list '" + desc + "': '" + std::string(text) + "' is not a count");
    return value;
}

}  // namespace

DelaySet::DelaySet(std::vector<std::size_t> deltas) : deltas_(std::move(deltas)) {
    if (deltas_.empty())
        throw std::invalid_argument("delay set must not be empty");
    for (std::size_t i = 1; i < deltas_.size(); ++i)
        if (deltas_[i] <= deltas_[i - 1])
            throw std::invalid_argument("delay set must be strictly increasing");
}

DelaySet DelaySet::standard() {
    std::vector<std::size_t> d;
    for (std::size_t k = 0; k <= 60; k += 4) d.push_back(k);
    return DelaySet(std::move(d));
}

DelaySet DelaySet::parse(const std::string& desc) {
    if (desc == "default") return standard();
    std::vector<std::size_t> d;
    if (desc.find(':') != std::string::npos) {
        std::vector<std::string_view> parts;
        std::string_view rest(desc);
        for (std::size_t pos; (pos = rest.find(':')) != std::string_view::npos; rest.remove_prefix(pos + 1))
            parts.push_back(rest.substr(0, pos));
        parts.push_back(rest);
        if (parts.size() != 3)
            throw std::invalid_argument("bad delay list '" + desc + "': expected start:stop:step");
        const auto start = parse_count(parts[0], desc);
        const auto stop = parse_count(parts[1], desc);
        const auto step = parse_count(parts[2], desc);
        if (step == 0 || stop < start)
            throw std::invalid_argument("bad delay list '" + desc + "': need step > 0 and stop >= start");
        for (std::size_t k = start; k <= stop; k += step) d.push_back(k);
    } else {
        std::string_view rest(desc);
        while (true) {
            const auto pos = rest.find(',');
            d.push_back(parse_count(rest.substr(0, pos), desc));
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
    }
    return DelaySet(std::move(d));
}

void DelaySet::validate(std::size_t n_subcarriers, std::size_t min_averaging) const {
    if (deltas_.empty())
        throw std::out_of_range("delay set is empty");
    if (max() >= n_subcarriers)
        throw std::out_of_range("delay " + std::to_string(max()) + " >= subcarrier count " +
                                std::to_string(n_subcarriers));
    if (n_subcarriers - max() < std::min(min_averaging, n_subcarriers))
        throw std::out_of_range("delay " + std::to_string(max()) + " leaves fewer than " +
                                std::to_string(min_averaging) + " averaged terms");
}

std::string DelaySet::to_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < deltas_.size(); ++i) os << (i ? "," : "") << deltas_[i];
    return os.str();
}

BeamTensor beam_transform(const CsiTensor& csi) {
    const auto& g = csi.geometry();
    const std::size_t M = g.n_rows, N = g.n_cols, F = csi.n_subcarriers();
    const auto wm = dft_matrix(M);
    const auto wn = dft_matrix(N);

    BeamTensor out{CsiTensor(g, F)};
    std::vector<cplx> tmp(M * N * F);  // (m, a, f) after the column transform
    for (std::size_t p = 0; p < g.n_pol; ++p) {
        std::fill(tmp.begin(), tmp.end(), cplx{});
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t a = 0; a < N; ++a) {
                cplx* dst = &tmp[(m * N + a) * F];
                for (std::size_t n = 0; n < N; ++n) {
                    const cplx w = wn[a * N + n];
                    const auto src = csi.plane(p, m, n);
                    for (std::size_t f = 0; f < F; ++f) dst[f] += w * src[f];
                }
            }
        for (std::size_t z = 0; z < M; ++z)
            for (std::size_t a = 0; a < N; ++a) {
                auto dst = out.beams.plane(p, z, a);
                for (std::size_t m = 0; m < M; ++m) {
                    const cplx w = wm[z * M + m];
                    const cplx* src = &tmp[(m * N + a) * F];
                    for (std::size_t f = 0; f < F; ++f) dst[f] += w * src[f];
                }
            }
    }
    return out;
}

AutocorrTensor freq_autocorr(const BeamTensor& beams, const DelaySet& deltas) {
    const auto& h = beams.beams;
    const std::size_t F = h.n_subcarriers();
    if (deltas.max() >= F)
        throw std::out_of_range("delay " + std::to_string(deltas.max()) + " >= subcarrier count " + std::to_string(F));

    const auto& g = h.geometry();
    AutocorrTensor out{g, deltas.size(), std::vector<double>(g.n_antennas() * deltas.size())};
    std::size_t k = 0;
    for (std::size_t p = 0; p < g.n_pol; ++p)
        for (std::size_t z = 0; z < g.n_rows; ++z)
            for (std::size_t a = 0; a < g.n_cols; ++a) {
                const auto x = h.plane(p, z, a);
                for (const std::size_t d : deltas.deltas()) {
                    double re = 0.0, im = 0.0;
                    for (std::size_t f = 0; f + d < F; ++f) {
                        // x[f] * conj(x[f + d])
                        const double ar = x[f].real(), ai = x[f].imag();
                        const double br = x[f + d].real(), bi = x[f + d].imag();
                        re += ar * br + ai * bi;
                        im += ai * br - ar * bi;
                    }
                    const double count = static_cast<double>(F - d);
                    out.values[k++] = std::hypot(re / count, im / count);
                }
            }
    return out;
}

FeatureVector log_features(const AutocorrTensor& autocorr, double floor_eps) {
    if (!(floor_eps > 0.0))
        throw std::invalid_argument("floor_eps must be positive");
    FeatureVector out;
    out.values.resize(autocorr.values.size());
    for (std::size_t i = 0; i < autocorr.values.size(); ++i) {
        const double v = autocorr.values[i];
        if (!(v >= 0.0))
            throw ContractViolation("autocorrelation magnitude " + std::to_string(v) + " at entry " +
                                    std::to_string(i) + " is negative or NaN");
        out.values[i] = std::log(std::max(v, floor_eps));
    }
    return out;
}

FeatureVector extract(const CsiTensor& csi, const DelaySet& deltas, double floor_eps) {
    return log_features(freq_autocorr(beam_transform(csi), deltas), floor_eps);
}

void extract_rows(std::span<const CsiTensor> csi, const DelaySet& deltas, double floor_eps, std::span<float> out) {
    if (csi.empty()) return;
    const std::size_t width = feature_length(csi.front().geometry(), deltas);
    if (out.size() != csi.size() * width)
        throw std::invalid_argument("feature output buffer has wrong size");
    const auto n = static_cast<std::ptrdiff_t>(csi.size());
    // Exceptions must not escape the parallel region; validate up front.
    for (const auto& c : csi)
        if (!c.same_shape(csi.front()))
            throw std::invalid_argument("all CSI tensors in a batch must share one shape");
    deltas.validate(csi.front().n_subcarriers(), 1);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto fv = extract(csi[static_cast<std::size_t>(i)], deltas, floor_eps);
        std::transform(fv.values.begin(), fv.values.end(), out.begin() + i * static_cast<std::ptrdiff_t>(width),
                       [](double v) { return static_cast<float>(v); });
    }
}

}  // namespace csiloc::features
