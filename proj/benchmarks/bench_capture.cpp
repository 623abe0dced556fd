#include <benchmark/benchmark.h>

#include "mocap/capture.hpp"
#include "mocap/geometry.hpp"
#include "mocap/synthetic_body.hpp"

namespace {

using namespace mocap;

Sensor bench_sensor() {
    Sensor s;
    s.width = 640;
    s.height = 576;
    s.intrinsics = Mat3::Identity();
    s.intrinsics(0, 0) = s.intrinsics(1, 1) = 525.0;
    s.intrinsics(0, 2) = 319.5;
    s.intrinsics(1, 2) = 287.5;
    s.extrinsics.translation = Vec3(0, 1.0, 2.8);
    s.extrinsics.rotation = rodrigues(Vec3(0, M_PI, 0));
    return s;
}

MarkerFrame bench_scene() {
    const BodyModel model = make_synthetic_body();
    const LandmarkSet lm =
        landmarks_of(model, BodyParams::rest(model.shape_dim(), model.joint_count()));
    MarkerFrame scene;
    for (int i = 0; i < model.marker_count(); ++i) {
        scene.points.push_back(lm.positions.row(i).transpose());
        scene.labels.push_back(lm.labels[i]);
    }
    return scene;
}

void BM_SimulateSensor(benchmark::State& state) {
    const Sensor sensor = bench_sensor();
    const MarkerFrame scene = bench_scene();
    Rng rng(31);
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_sensor(scene, sensor, SensorSimConfig{}, rng).ir.sum());
}
BENCHMARK(BM_SimulateSensor);

void BM_ExtractAndFuse(benchmark::State& state) {
    const Sensor sensor = bench_sensor();
    const MarkerFrame scene = bench_scene();
    Rng rng(32);
    const SensorFrame frame = simulate_sensor(scene, sensor, SensorSimConfig{}, rng);
    for (auto _ : state) {
        std::vector<MarkerObservation> obs;
        for (const auto& blob : extract_blobs(frame.ir, 0.5)) {
            const auto o = blob_to_marker(frame, sensor, blob);
            if (o) obs.push_back(*o);
        }
        benchmark::DoNotOptimize(fuse_and_cluster(obs).size());
    }
}
BENCHMARK(BM_ExtractAndFuse);

}  // namespace
