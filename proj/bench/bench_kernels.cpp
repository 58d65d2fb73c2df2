// OpenMP kernels against their serial references.

#include "textboot/kernels.hpp"
#include "textboot/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace textboot;
using namespace textboot::kernels;

namespace {

std::vector<FeaturePlane> planes(int n, int size) {
    SceneSpec s;
    s.width = size;
    s.height = size;
    s.seed = 3;
    std::vector<FeaturePlane> out;
    for (int i = 0; i < n; ++i)
        out.emplace_back(render_scene(s, i).image, 2);
    return out;
}

std::vector<double> weights(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<double> w(n);
    for (auto& v : w)
        v = g(rng);
    return w;
}

std::vector<PixelSample> batch(std::size_t n, int n_planes, int size) {
    std::mt19937_64 rng(2);
    std::vector<PixelSample> b(n);
    for (auto& s : b)
        s = {static_cast<std::uint32_t>(rng() % n_planes), static_cast<std::uint16_t>(rng() % size),
             static_cast<std::uint16_t>(rng() % size), static_cast<float>(rng() % 2)};
    return b;
}

template <auto Kernel>
void BM_ProbabilityMap(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const auto p = planes(1, size);
    const auto w = weights(p[0].feature_count());
    std::vector<float> out(static_cast<std::size_t>(size) * size);
    for (auto _ : state) {
        Kernel(p[0], w, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * size * size);
}

template <auto Kernel>
void BM_BatchGradient(benchmark::State& state) {
    const auto p = planes(8, 64);
    const auto w = weights(p[0].feature_count());
    const auto b = batch(static_cast<std::size_t>(state.range(0)), 8, 64);
    std::vector<double> g(w.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(Kernel(p, b, w, 3.0, g));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_ProbabilityMap<probability_map>)->Name("probability_map/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_ProbabilityMap<probability_map_serial>)->Name("probability_map/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_BatchGradient<batch_gradient>)->Name("batch_gradient/openmp")->Arg(256)->Arg(4096);
BENCHMARK(BM_BatchGradient<batch_gradient_serial>)->Name("batch_gradient/serial")->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
