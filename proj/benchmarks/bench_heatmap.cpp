#include <benchmark/benchmark.h>

#include "mocap/heatmap.hpp"
#include "mocap/rng.hpp"

namespace {

using namespace mocap;

Points bench_coords(int count) {
    Rng rng(17);
    Points coords(count, 3);
    for (int i = 0; i < count; ++i)
        coords.row(i) << rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85),
            rng.uniform(0.15, 0.85);
    return coords;
}

void BM_EncodeHeatmap(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(encode_heatmap(Vec2(0.37, 0.61), 2.0).sum());
}
BENCHMARK(BM_EncodeHeatmap);

void BM_SoftArgmax(benchmark::State& state) {
    const Mat map = encode_heatmap(Vec2(0.37, 0.61), 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(soft_argmax(map).sum());
}
BENCHMARK(BM_SoftArgmax);

void BM_StackFusion(benchmark::State& state) {
    const Points coords = bench_coords(71);
    const HeatmapStack xy = encode_stack(coords, GridView::xy, 2.0);
    const HeatmapStack yz = encode_stack(coords, GridView::yz, 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(marginal_fuse(xy, yz).coords.sum());
}
BENCHMARK(BM_StackFusion);

}  // namespace
