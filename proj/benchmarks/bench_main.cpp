#include <benchmark/benchmark.h>

#include "oodcal/aleatoric.hpp"
#include "oodcal/calibnet.hpp"
#include "oodcal/corruption.hpp"
#include "oodcal/metrics.hpp"
#include "oodcal/nn/layers.hpp"
#include "oodcal/phantom.hpp"
#include "oodcal/segnet.hpp"
#include "oodcal/softmax.hpp"

using namespace oodcal;

namespace {

TensorF noise(std::size_t c, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    auto t = TensorF::grid(c, n, n);
    for (auto& v : t.storage()) v = static_cast<float>(rng.uniform());
    return t;
}

ImageSlice phantom_slice(std::size_t n) {
    return phantom::generate_case(phantom::PhantomConfig::for_size(n), 1).front().first;
}

}  // namespace

static void BM_Conv3x3(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto ch = static_cast<std::size_t>(state.range(1));
    nn::Conv2d<float> conv("c", ch, ch, 3, 1);
    auto x = noise(ch, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * ch * ch * 9));
}
BENCHMARK(BM_Conv3x3)->Args({128, 8})->Args({64, 16})->Args({32, 32})->Unit(benchmark::kMicrosecond);

static void BM_SegNetForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    segnet::SegModelConfig cfg;
    cfg.base_channels = static_cast<std::size_t>(state.range(1));
    segnet::SegNet net(cfg);
    auto x = phantom_slice(n);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_SegNetForward)->Args({128, 8})->Args({128, 16})->Unit(benchmark::kMillisecond);

static void BM_Corruption(benchmark::State& state) {
    const auto kind = static_cast<corruption::Kind>(state.range(0));
    auto x = phantom_slice(128);
    auto spec = corruption::CorruptionSpec::preset(kind, corruption::Severity::moderate, 3);
    for (auto _ : state) benchmark::DoNotOptimize(corruption::apply(x, spec));
    state.SetLabel(corruption::to_string(kind));
}
BENCHMARK(BM_Corruption)
    ->DenseRange(static_cast<int>(corruption::Kind::bias_field), static_cast<int>(corruption::Kind::spike))
    ->Unit(benchmark::kMicrosecond);

static void BM_Susceptibility(benchmark::State& state) {
    segnet::SegModelConfig cfg;
    cfg.base_channels = 8;
    segnet::SegNet net(cfg);
    auto x = phantom_slice(128);
    const auto policy = augment::AugmentationPolicy{}.photometric_only();
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(aleatoric::estimate(net, x, policy, n, 4));
}
BENCHMARK(BM_Susceptibility)->Arg(1)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_CalibNetForward(benchmark::State& state) {
    calib::CalibNetConfig cfg;
    calib::CalibNet<float> g(cfg);
    const std::size_t n = 128;
    calib::CalibInputs<float> in{noise(4, n, 1), noise(4, n, 2), noise(4, n, 3), noise(4, n, 4), noise(1, n, 5)};
    for (auto _ : state) benchmark::DoNotOptimize(g.forward(in));
}
BENCHMARK(BM_CalibNetForward)->Unit(benchmark::kMillisecond);

static void BM_SliceStats(benchmark::State& state) {
    const std::size_t n = 128;
    auto p = softmax(LogitMap(noise(4, n, 6)));
    auto y = phantom::generate_case(phantom::PhantomConfig::for_size(n), 1).front().second;
    auto roi = metrics::dilated_roi(y);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::slice_stats(p, y, roi));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}
BENCHMARK(BM_SliceStats)->Unit(benchmark::kMicrosecond);

static void BM_Ece(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    std::vector<double> conf(n);
    std::vector<std::uint8_t> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
        conf[i] = rng.uniform(0.25, 1.0);
        correct[i] = rng.bernoulli(conf[i]);
    }
    for (auto _ : state) benchmark::DoNotOptimize(metrics::ece(conf, correct, metrics::BinningConfig{}));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_Ece)->Range(1 << 10, 1 << 18);
BENCHMARK_MAIN();
