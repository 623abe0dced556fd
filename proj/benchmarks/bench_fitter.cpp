#include <benchmark/benchmark.h>

#include <memory>

#include "mocap/autoencoder.hpp"
#include "mocap/fitter.hpp"
#include "mocap/rng.hpp"
#include "mocap/synthetic_body.hpp"

namespace {

using namespace mocap;

struct FitBench {
    BodyModel model = make_synthetic_body();
    std::unique_ptr<PcaAutoencoder> ae;
    FitProblem problem;

    FitBench() {
        Rng rng(23);
        std::vector<Vec> poses;
        for (int i = 0; i < 200; ++i) {
            Vec t(3 * model.joint_count());
            for (int k = 0; k < t.size(); ++k) t[k] = rng.uniform(-0.5, 0.5);
            poses.push_back(std::move(t));
        }
        ae = std::make_unique<PcaAutoencoder>(
            PcaAutoencoder::fit(poses, 3 * model.joint_count()));

        BodyParams gt = BodyParams::rest(model.shape_dim(), model.joint_count());
        for (int i = 0; i < gt.theta.size(); ++i) gt.theta[i] = rng.uniform(-0.4, 0.4);
        problem.model = &model;
        problem.ae = ae.get();
        problem.targets = landmarks_of(model, gt).positions;
        problem.observed.assign(model.landmark_count(), false);
        for (int i = 0; i < model.landmark_count(); ++i)
            problem.observed[i] = model.landmark_kinds[i] == LandmarkKind::marker;
    }
};

void BM_EnergyAndGradient(benchmark::State& state) {
    static FitBench bench;
    FitConfig config;
    FitState st;
    st.beta = Vec::Zero(bench.model.shape_dim());
    st.pose = bench.ae->encode(Vec::Zero(3 * bench.model.joint_count()));
    st.log_sigma = Vec::Constant(bench.model.marker_count(), -3.9);
    for (auto _ : state)
        benchmark::DoNotOptimize(fit_gradient(bench.problem, config, st).sum());
}
BENCHMARK(BM_EnergyAndGradient);

void BM_FullFit(benchmark::State& state) {
    static FitBench bench;
    for (auto _ : state) benchmark::DoNotOptimize(fit(bench.problem, FitConfig{}).energy);
}
BENCHMARK(BM_FullFit)->Unit(benchmark::kMillisecond);

}  // namespace
