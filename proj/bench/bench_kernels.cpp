// SPDX-License-Identifier: Apache-2.0
//
// Serial reference loops vs the OpenMP kernels for the two data-parallel
// stages: sample generation and feature extraction. Speedups only show with
// more than one hardware thread.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "csiloc/channel_sim.hpp"
#include "csiloc/features.hpp"
#include "csiloc/nn.hpp"

using namespace csiloc;

namespace {

const sim::SampleSource& source() {
    static const sim::SampleSource src = [] {
        const auto scene = sim::Scene::random_campus(11);
        auto traj = sim::TrajectoryConfig::random_walk(scene.bounds, 20, 1.5, 3);
        traj.max_samples = 256;
        sim::ImpairmentProcess imp;
        imp.mode = sim::ImpairmentProcess::Mode::per_sample_random;
        return sim::SampleSource(scene, traj, imp);
    }();
    return src;
}

std::vector<CsiTensor> tensors(std::size_t n) {
    std::vector<CsiTensor> out;
    for (const auto& s : source().batch(0, n)) out.push_back(s.csi);
    return out;
}

void BM_GenerateSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state)
        for (std::size_t i = 0; i < n; ++i) benchmark::DoNotOptimize(source().sample(i));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GenerateOpenMP(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(source().batch(0, n));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ExtractSerial(benchmark::State& state) {
    const auto batch = tensors(static_cast<std::size_t>(state.range(0)));
    const auto d = features::DelaySet::standard();
    std::vector<float> rows(batch.size() * 1024);
    for (auto _ : state) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto fv = features::extract(batch[i], d);
            for (std::size_t k = 0; k < fv.size(); ++k) rows[i * 1024 + k] = static_cast<float>(fv.values[k]);
        }
        benchmark::DoNotOptimize(rows.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ExtractOpenMP(benchmark::State& state) {
    const auto batch = tensors(static_cast<std::size_t>(state.range(0)));
    const auto d = features::DelaySet::standard();
    std::vector<float> rows(batch.size() * 1024);
    for (auto _ : state) {
        features::extract_rows(batch, d, features::kDefaultFloorEps, rows);
        benchmark::DoNotOptimize(rows.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

// One training step of the full regressor at batch 1000.
void BM_TrainStep(benchmark::State& state) {
    auto model = nn::build_regressor<float>(1024, 1);
    const nn::Matrix<float> x = nn::Matrix<float>::Random(1000, 1024);
    const nn::Matrix<float> y = nn::Matrix<float>::Random(1000, 2);
    nn::AdamState<float> adam;
    for (auto _ : state) {
        const auto fr = nn::forward(model, x, nn::Mode::train);
        const auto loss = nn::mse_loss(fr.output, y);
        const auto g = nn::backward(model, fr.cache, loss.grad);
        nn::adam_step(model, g, adam);
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}

}  // namespace

BENCHMARK(BM_GenerateSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateOpenMP)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractOpenMP)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
