// SPDX-License-Identifier: Apache-2.0

#include "csiloc/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "csiloc/channel_sim.hpp"
#include "csiloc/features.hpp"
#include "csiloc/nn.hpp"

namespace csiloc::selftest {

namespace {

template <class F>
CheckResult timed(const char* name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r = body();
    r.name = name;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Channels from a random scene at random positions, so the check sees the
// same kind of input as the pipeline.
CsiTensor random_channel(std::mt19937_64& rng) {
    const auto scene = sim::Scene::random_campus(rng());
    std::uniform_real_distribution<double> u(-90.0, 90.0);
    for (;;) {
        try {
            return sim::synth_channel_clean(scene, {u(rng), u(rng), 1.5});
        } catch (const std::exception&) {
            // a position on top of a scatterer; draw again
        }
    }
}

}  // namespace

CheckResult check_param_count() {
    return timed("param_count", [] {
        const auto n = nn::param_count(nn::build_regressor<float>(1024));
        return CheckResult{"", n == 9105346, "expected 9,105,346, got " + std::to_string(n)};
    });
}

CheckResult check_feature_length() {
    return timed("feature_length", [] {
        CsiTensor h(ArrayGeometry{}, 288);
        const auto fv = features::extract(h, features::DelaySet::standard());
        const bool ok = h.size() == 18432 && fv.size() == 1024;
        return CheckResult{"", ok, std::to_string(h.size()) + " inputs -> " + std::to_string(fv.size()) + " features"};
    });
}

CheckResult check_invariance(std::size_t trials, std::uint64_t seed) {
    return timed("phase_invariance", [&] {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uphi(0.0, kTwoPi), ualpha(-kPi / 64, kPi / 64);
        const auto d = features::DelaySet::standard();
        double worst = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto h = random_channel(rng);
            const auto a = features::extract(h, d);
            const auto b = features::extract(sim::apply_impairments(h, {uphi(rng), ualpha(rng)}), d);
            for (std::size_t i = 0; i < a.size(); ++i)
                worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / std::max(std::abs(a.values[i]), 1e-300));
        }
        return CheckResult{"", worst <= 1e-9,
                           std::to_string(trials) + " trials, max relative deviation " + fmt("%.3g", worst)};
    });
}

CheckResult check_parseval(std::size_t trials, std::uint64_t seed) {
    return timed("beam_energy", [&] {
        std::mt19937_64 rng(seed);
        double worst = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto h = random_channel(rng);
            const auto b = features::beam_transform(h).beams;
            const auto& g = h.geometry();
            for (std::size_t p = 0; p < g.n_pol; ++p)
                for (std::size_t f = 0; f < h.n_subcarriers(); ++f) {
                    double ea = 0.0, eb = 0.0;
                    for (std::size_t m = 0; m < g.n_rows; ++m)
                        for (std::size_t n = 0; n < g.n_cols; ++n) {
                            ea += std::norm(h(p, m, n, f));
                            eb += std::norm(b(p, m, n, f));
                        }
                    worst = std::max(worst, std::abs(ea - eb) / ea);
                }
        }
        return CheckResult{"", worst <= 1e-12,
                           std::to_string(trials) + " tensors, max relative energy error " + fmt("%.3g", worst)};
    });
}

CheckResult check_gradients(std::size_t trials, std::uint64_t seed) {
    return timed("gradient_check", [&] {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        std::size_t checked = 0, bad = 0;
        const double h = 1e-6;
        for (std::size_t t = 0; t < trials; ++t) {
            for (int head = 0; head < 2; ++head) {
                const bool cls = head == 1;
                const std::vector<std::size_t> hidden{5, 4};
                auto m = nn::build_mlp<double>(6, hidden, 3, cls ? nn::HeadKind::classification : nn::HeadKind::regression,
                                               rng());
                for (auto& b : m.blocks)
                    for (auto& v : b.bn.gamma) v = 1.0 + 0.3 * nd(rng);
                nn::Matrix<double> x(8, 6), y(8, 3);
                for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
                for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = nd(rng);
                std::vector<int> labels(8);
                for (int i = 0; i < 8; ++i) labels[i] = static_cast<int>(rng() % 3);
                const auto loss = [&](const nn::Matrix<double>& out) {
                    return cls ? nn::cross_entropy_loss(out, std::span<const int>(labels)) : nn::mse_loss(out, y);
                };
                const auto fr = nn::forward(m, x, nn::Mode::train);
                const auto grads = nn::backward(m, fr.cache, loss(fr.output).grad);
                std::vector<std::vector<double>> analytic;
                grads.for_each([&](std::span<const double> s) { analytic.emplace_back(s.begin(), s.end()); });
                std::size_t tensor = 0;
                m.for_each_param([&](std::span<double> p) {
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        const double saved = p[i];
                        p[i] = saved + h;
                        const double up = loss(nn::forward(m, x, nn::Mode::train).output).loss;
                        p[i] = saved - h;
                        const double down = loss(nn::forward(m, x, nn::Mode::train).output).loss;
                        p[i] = saved;
                        const double num = (up - down) / (2 * h), an = analytic[tensor][i];
                        ++checked;
                        if (std::abs(num - an) > std::max(1e-6, 1e-4 * std::max(std::abs(num), std::abs(an)))) ++bad;
                    }
                    ++tensor;
                });
            }
        }
        return CheckResult{"", bad == 0,
                           std::to_string(checked) + " partial derivatives, " + std::to_string(bad) + " outside tolerance"};
    });
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
    return {check_param_count(), check_feature_length(), check_invariance(100, seed), check_parseval(20, seed + 1),
            check_gradients(4, seed + 2)};
}

}  // namespace csiloc::selftest
