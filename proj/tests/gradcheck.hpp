// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference gradient check shared by the unit tests and the
// acceptance runner. Each trial builds small double-precision networks that
// contain every layer type (BN, FC, ReLU, linear head), runs both losses and
// compares analytic parameter and input gradients with central differences.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csiloc/nn.hpp"
#include "oracles.hpp"

namespace gradcheck {

struct Report {
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst_rel = 0.0;  // over entries where the relative tolerance governs
    std::string first_failure;
};

namespace detail {

using csiloc::nn::Matrix;

inline void compare(Report& r, const std::string& what, double analytic, double numeric) {
    ++r.checked;
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale > 1e-2) r.worst_rel = std::max(r.worst_rel, std::abs(analytic - numeric) / scale);
    if (!oracle::grad_close(analytic, numeric)) {
        if (r.failures++ == 0)
            r.first_failure = what + ": analytic " + std::to_string(analytic) + " numeric " + std::to_string(numeric);
    }
}

// Randomizes BN affine parameters and the output affine so that no gradient
// path is trivially identity.
inline void perturb(csiloc::nn::MlpModel<double>& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.5, 1.5), s(-0.5, 0.5);
    for (auto& b : m.blocks) {
        for (auto& g : b.bn.gamma) g = u(rng);
        for (auto& g : b.bn.beta) g = s(rng);
        for (auto& g : b.fc.bias) g = s(rng);
    }
    if (m.head == csiloc::nn::HeadKind::regression) {
        for (auto& v : m.output_scale) v = u(rng) * 3.0;
        for (auto& v : m.output_offset) v = s(rng) * 10.0;
    }
    m.touch();
}

inline void check_model(Report& r, const std::string& tag, csiloc::nn::MlpModel<double>& m, const Matrix<double>& x,
                        const std::function<csiloc::nn::LossResult<double>(const Matrix<double>&)>& loss) {
    using namespace csiloc::nn;
    const auto fr = forward(m, x, Mode::train);
    const auto lr = loss(fr.output);
    Matrix<double> dx;
    const auto grads = backward(m, fr.cache, lr.grad, &dx);
    const auto fast = backward(m, fr.cache, lr.grad);  // shortcut path for the first block

    const double h = 1e-6;
    const auto numeric = oracle::numeric_gradients<double>(m, [&] { return loss(forward(m, x, Mode::train).output).loss; }, h);

    std::vector<std::vector<double>> analytic, shortcut;
    grads.for_each([&](std::span<const double> s) { analytic.emplace_back(s.begin(), s.end()); });
    fast.for_each([&](std::span<const double> s) { shortcut.emplace_back(s.begin(), s.end()); });
    static const char* names[] = {"gamma", "beta", "weight", "bias"};
    for (std::size_t t = 0; t < numeric.size(); ++t)
        for (std::size_t i = 0; i < numeric[t].size(); ++i) {
            const std::string what = tag + " block " + std::to_string(t / 4) + " " + names[t % 4] + "[" + std::to_string(i) + "]";
            compare(r, what, analytic[t][i], numeric[t][i]);
            compare(r, what + " (shortcut)", shortcut[t][i], numeric[t][i]);
        }

    Matrix<double> xp = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            const double saved = xp(i, k);
            xp(i, k) = saved + h;
            const double up = loss(forward(m, xp, Mode::train).output).loss;
            xp(i, k) = saved - h;
            const double down = loss(forward(m, xp, Mode::train).output).loss;
            xp(i, k) = saved;
            compare(r, tag + " input[" + std::to_string(i) + "," + std::to_string(k) + "]", dx(i, k),
                    (up - down) / (2.0 * h));
        }
}

}  // namespace detail

inline Report run_trial(std::uint64_t seed) {
    using namespace csiloc::nn;
    Report r;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const std::size_t B = 8, D = 6;
    Matrix<double> x(B, D);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2.0 * nd(rng) + 0.5;

    {
        const std::vector<std::size_t> hidden{5, 4};
        auto m = build_mlp<double>(D, hidden, 3, HeadKind::regression, seed);
        detail::perturb(m, rng);
        Matrix<double> y(B, 3);
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 5.0 * nd(rng);
        detail::check_model(r, "mse", m, x, [&](const Matrix<double>& out) { return mse_loss(out, y); });
    }
    {
        const std::vector<std::size_t> hidden{7};
        auto m = build_mlp<double>(D, hidden, 4, HeadKind::classification, seed + 1000);
        detail::perturb(m, rng);
        std::vector<int> labels(B);
        std::uniform_int_distribution<int> ul(0, 3);
        for (auto& l : labels) l = ul(rng);
        detail::check_model(r, "cross_entropy", m, x,
                            [&](const Matrix<double>& out) { return cross_entropy_loss(out, labels); });
    }
    return r;
}

}  // namespace gradcheck
