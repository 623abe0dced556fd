#include <benchmark/benchmark.h>

#include "mocap/body_model.hpp"
#include "mocap/rng.hpp"
#include "mocap/synthetic_body.hpp"

namespace {

using namespace mocap;

BodyParams bench_params(const BodyModel& model, std::uint64_t seed) {
    Rng rng(seed);
    BodyParams p = BodyParams::rest(model.shape_dim(), model.joint_count());
    for (int i = 0; i < p.beta.size(); ++i) p.beta[i] = rng.uniform(-0.5, 0.5);
    for (int i = 0; i < p.theta.size(); ++i) p.theta[i] = rng.uniform(-0.5, 0.5);
    return p;
}

void BM_Skin(benchmark::State& state) {
    const BodyModel model = make_synthetic_body();
    const BodyParams params = bench_params(model, 7);
    for (auto _ : state) benchmark::DoNotOptimize(skin(model, params).vertices.sum());
}
BENCHMARK(BM_Skin);

void BM_Landmarks(benchmark::State& state) {
    const BodyModel model = make_synthetic_body();
    const BodyParams params = bench_params(model, 8);
    for (auto _ : state) benchmark::DoNotOptimize(landmarks_of(model, params).positions.sum());
}
BENCHMARK(BM_Landmarks);

void BM_VertexNormals(benchmark::State& state) {
    const BodyModel model = make_synthetic_body();
    const MeshSurface mesh = skin(model, bench_params(model, 9));
    for (auto _ : state) benchmark::DoNotOptimize(vertex_normals(mesh).normals.sum());
}
BENCHMARK(BM_VertexNormals);

}  // namespace

BENCHMARK_MAIN();
