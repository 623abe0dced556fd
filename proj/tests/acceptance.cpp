// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line each. Exit status is the number of failures.
//
// Usage: acceptance <mocap-cli-binary> <data-dir>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <vector>

#include "mocap/balance.hpp"
#include "mocap/capture.hpp"
#include "mocap/corruption.hpp"
#include "mocap/fitter.hpp"
#include "mocap/geometry.hpp"
#include "mocap/heatmap.hpp"
#include "mocap/io.hpp"
#include "mocap/metrics.hpp"
#include "mocap/synthetic_body.hpp"
#include "test_util.hpp"

using namespace mocap;
using namespace mocap::testutil;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
std::string g_data_dir;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            if (!detail.str().empty()) detail << "; ";
            detail << what;
        }
    }
};

BodyModel load_gate_model() {
    const std::string shipped = g_data_dir + "/synthetic_body_53x18.json";
    if (fs::exists(shipped)) return load_body_model(shipped);
    return make_synthetic_body();
}

double joint_rmse(const BodyModel& model, const BodyParams& a, const BodyParams& b) {
    const LandmarkSet la = landmarks_of(model, a);
    const LandmarkSet lb = landmarks_of(model, b);
    double sq = 0;
    int n = 0;
    for (int i = 0; i < la.count(); ++i) {
        if (la.kinds[i] != LandmarkKind::joint) continue;
        sq += (la.positions.row(i) - lb.positions.row(i)).squaredNorm();
        ++n;
    }
    return std::sqrt(sq / n);
}

FitProblem marker_problem(const BodyModel& model, const PcaAutoencoder* ae,
                          const BodyParams& gt) {
    FitProblem problem;
    problem.model = &model;
    problem.ae = ae;
    problem.targets = landmarks_of(model, gt).positions;
    problem.observed.assign(model.landmark_count(), false);
    for (int i = 0; i < model.landmark_count(); ++i)
        problem.observed[i] = model.landmark_kinds[i] == LandmarkKind::marker;
    return problem;
}

std::shared_ptr<PcaAutoencoder> gate_prior(const BodyModel& model) {
    Rng rng(90001);
    std::vector<Vec> poses;
    for (int i = 0; i < 220; ++i) poses.push_back(random_params(model, rng, 0.6, 0.0).theta);
    return std::make_shared<PcaAutoencoder>(
        PcaAutoencoder::fit(poses, 3 * model.joint_count()));
}

// ---- criterion 1: forward-model oracles ------------------------------------

bool criterion_forward(Check& check) {
    const auto start = std::chrono::steady_clock::now();
    const BodyModel model = load_gate_model();
    Rng rng(90010);

    double worst_lbs = 0, worst_lm = 0, worst_rigid = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const BodyParams p = random_params(model, rng, 0.8, 0.8, true);
        const MeshSurface mesh = skin(model, p);
        worst_lbs = std::max(worst_lbs,
                             (mesh.vertices - lbs_oracle(model, p)).cwiseAbs().maxCoeff());

        const VertexNormals vn = vertex_normals(mesh);
        const LandmarkSet lm = extract_landmarks(model, mesh, vn.normals);
        const Mat dense = Mat(model.landmark_regressor);
        const Points base = dense * mesh.vertices;
        const Points reg_n = dense * vn.normals;
        for (int l = 0; l < model.landmark_count(); ++l) {
            Vec3 expected = base.row(l).transpose();
            if (model.landmark_extrude[l])
                expected += model.marker_radius * reg_n.row(l).transpose().normalized();
            worst_lm =
                std::max(worst_lm, (lm.positions.row(l).transpose() - expected).norm());
        }
    }
    for (int trial = 0; trial < 100; ++trial) {
        BodyParams p = random_params(model, rng, 0.6, 0.6, false);
        const LandmarkSet base = landmarks_of(model, p);
        RigidTransform g;
        g.rotation = rodrigues(rng.normal3());
        g.translation = rng.normal3();
        p.root = g;
        worst_rigid = std::max(
            worst_rigid,
            (landmarks_of(model, p).positions - g.apply(base.positions)).cwiseAbs().maxCoeff());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    check.require(worst_lbs < 1e-9, "LBS oracle deviation " + std::to_string(worst_lbs));
    check.require(worst_lm < 1e-9, "landmark oracle deviation " + std::to_string(worst_lm));
    check.require(worst_rigid < 1e-9, "rigid equivariance " + std::to_string(worst_rigid));
    check.require(secs < 5.0, "runtime " + std::to_string(secs) + " s");
    return check.ok;
}

// ---- criterion 2: fitter round trip ------------------------------------------

bool criterion_fit_round_trip(Check& check) {
    const BodyModel model = load_gate_model();
    const auto ae = gate_prior(model);
    Rng rng(90020);

    double worst_rmse = 0, worst_secs = 0;
    for (int trial = 0; trial < 50; ++trial) {
        BodyParams gt = random_params(model, rng, 0.5, 0.5);
        gt.root.rotation = rodrigues(Vec3(0, rng.uniform(-0.5, 0.5), 0));
        gt.root.translation = Vec3(rng.uniform(-0.5, 0.5), 0, rng.uniform(-0.5, 0.5));
        const FitProblem problem = marker_problem(model, ae.get(), gt);

        const auto t0 = std::chrono::steady_clock::now();
        const FitResult result = fit(problem, FitConfig{});
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        worst_secs = std::max(worst_secs, secs);
        worst_rmse = std::max(worst_rmse, joint_rmse(model, result.params, gt));
    }
    check.require(worst_rmse < 0.005,
                  "worst joint RMSE " + std::to_string(worst_rmse * 1000) + " mm");
    check.require(worst_secs < 2.0, "worst frame time " + std::to_string(worst_secs) + " s");
    return check.ok;
}

// ---- criterion 3: noise-aware superiority ------------------------------------

bool criterion_noise_aware(Check& check) {
    const BodyModel model = load_gate_model();
    const auto ae = gate_prior(model);
    Rng rng(90030);

    const int trials = 100;
    int wins = 0, sigma_top = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const BodyParams gt = random_params(model, rng, 0.45, 0.35);
        FitProblem problem = marker_problem(model, ae.get(), gt);

        const int m_count = model.marker_count();
        const std::vector<int> corrupted = rng.sample_indices(m_count, m_count / 10);
        for (int idx : corrupted)
            problem.targets.row(idx) += (0.2 * rng.normal3().normalized()).transpose();

        const FitResult aware = fit(problem, FitConfig{});
        const FitResult plain = plain_fit(problem, FitConfig{});
        if (joint_rmse(model, aware.params, gt) < joint_rmse(model, plain.params, gt)) ++wins;

        std::vector<double> sigmas(aware.sigma.data(), aware.sigma.data() + m_count);
        std::vector<double> sorted = sigmas;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const std::size_t decile_count =
            std::max<std::size_t>(corrupted.size(), (m_count + 9) / 10);
        const double cut = sorted[decile_count - 1];
        bool all_top = true;
        for (int idx : corrupted)
            if (sigmas[idx] < cut) all_top = false;
        sigma_top += all_top;
    }
    check.require(wins >= 90, "noise-aware wins " + std::to_string(wins) + "/100");
    check.require(sigma_top >= 95,
                  "corrupted-sigma top-decile trials " + std::to_string(sigma_top) + "/100");
    return check.ok;
}

// ---- criterion 4: gradient validation ------------------------------------------

bool criterion_gradients(Check& check) {
    const BodyModel model = load_gate_model();
    const auto ae = gate_prior(model);
    Rng rng(90040);
    const BodyParams gt = random_params(model, rng, 0.4, 0.4, true);
    const FitProblem problem = marker_problem(model, ae.get(), gt);
    const FitConfig config;

    double worst_rel = 0;
    for (int state_i = 0; state_i < 100; ++state_i) {
        FitState st;
        st.beta = rng.normal_vec(model.shape_dim()) * 0.3;
        st.pose = rng.normal_vec(ae->latent_dim()) * 0.3;
        st.root_omega = rng.normal3() * 0.4;
        st.root_t = rng.normal3() * 0.2;
        st.log_sigma = Vec::Zero(model.marker_count());
        for (int i = 0; i < st.log_sigma.size(); ++i) st.log_sigma[i] = rng.uniform(-3.5, -0.5);

        const Vec analytic = fit_gradient(problem, config, st);
        const Vec x0 = pack_state(problem, config, st);
        const double h = 1e-5;
        for (int i = 0; i < x0.size(); ++i) {
            Vec xp = x0, xm = x0;
            xp[i] += h;
            xm[i] -= h;
            const double fd =
                (fit_energy(problem, config, unpack_state(problem, config, xp)) -
                 fit_energy(problem, config, unpack_state(problem, config, xm))) /
                (2 * h);
            worst_rel = std::max(
                worst_rel, std::abs(analytic[i] - fd) / std::max(std::abs(fd), 1e-6));
        }
    }
    check.require(worst_rel < 1e-4, "worst gradient rel error " + std::to_string(worst_rel));

    // Sigma stationary point: minimize over sigma only, compare to sqrt(r).
    FitProblem sigma_problem = marker_problem(
        model, ae.get(), BodyParams::rest(model.shape_dim(), model.joint_count()));
    std::vector<double> rns;
    for (int i = 0; i < model.landmark_count(); ++i) {
        if (!sigma_problem.observed[i]) continue;
        const double rn = rng.uniform(0.02, 0.4);
        sigma_problem.targets.row(i) += (rn * rng.normal3().normalized()).transpose();
        rns.push_back(rn);
    }
    FitConfig sconf;
    sconf.lambda_beta = sconf.lambda_z = 0.0;
    FitState st;
    st.beta = Vec::Zero(model.shape_dim());
    st.pose = ae->encode(Vec::Zero(3 * model.joint_count()));
    st.log_sigma = Vec::Constant(static_cast<int>(rns.size()), std::log(0.02));
    const StateLayout ly = state_layout(sigma_problem, sconf);
    std::vector<int> free_idx;
    for (int i = 0; i < ly.log_sigma_size; ++i) free_idx.push_back(ly.log_sigma_offset + i);
    const MinimizeOutcome out = minimize_state(sigma_problem, sconf, st, free_idx, 1.0, 500);
    double worst_sigma = 0;
    for (std::size_t i = 0; i < rns.size(); ++i)
        worst_sigma =
            std::max(worst_sigma, std::abs(std::exp(out.state.log_sigma[static_cast<int>(i)]) -
                                           std::sqrt(rns[i])));
    check.require(worst_sigma < 1e-4,
                  "sigma stationarity deviation " + std::to_string(worst_sigma));
    return check.ok;
}

// ---- criterion 5: heatmap round trip ---------------------------------------------

bool criterion_heatmaps(Check& check) {
    Rng rng(90050);
    double worst_px = 0;
    for (int i = 0; i < 1000; ++i) {
        const Vec2 target(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
        const Vec2 back = soft_argmax(encode_heatmap(target, 2.0));
        worst_px = std::max(worst_px, (back - target).norm() * 159.0);
    }
    check.require(worst_px < 0.25, "round-trip error " + std::to_string(worst_px) + " px");

    double worst_fuse = 0;
    Points coords(71, 3);
    for (int i = 0; i < coords.rows(); ++i)
        coords.row(i) << rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85),
            rng.uniform(0.15, 0.85);
    const NormalizedFrame fused = marginal_fuse(encode_stack(coords, GridView::xy, 2.0),
                                                encode_stack(coords, GridView::yz, 2.0));
    for (int i = 0; i < coords.rows(); ++i)
        worst_fuse = std::max(
            worst_fuse, (fused.coords.row(i) - coords.row(i)).norm() * 159.0);
    check.require(worst_fuse < 0.25, "fusion error " + std::to_string(worst_fuse) + " px");

    const Mat a = encode_heatmap(Vec2(0.3, 0.42), 2.0, 64);
    check.require(std::abs(js_divergence(a, a)) < 1e-9, "JS(a,a) != 0");
    Mat p = Mat::Zero(16, 16), q = Mat::Zero(16, 16);
    p(2, 2) = 1.0;
    q(10, 10) = 1.0;
    check.require(std::abs(js_divergence(p, q) - std::log(2.0)) < 1e-9, "JS max != ln 2");
    check.require(std::abs(welsch(0.05, 0.05) - (1.0 - std::exp(-0.5))) < 1e-12,
                  "welsch(nu, nu) mismatch");
    return check.ok;
}

// ---- criterion 6: corruption statistics ---------------------------------------------

bool criterion_corruption(Check& check) {
    const BodyModel model = load_gate_model();
    const FlipMetadata meta = flip_metadata(model);
    Rng setup(90060);
    MarkerFrame frame;
    for (int i = 0; i < 25; ++i) {
        frame.points.push_back(setup.normal3());
        frame.labels.push_back("P" + std::to_string(i));
    }
    const BodyParams params = BodyParams::rest(model.shape_dim(), model.joint_count());

    CorruptionConfig config;  // 0.5 0.5 0.7 0.7 0.8
    Rng root(90061);
    const int trials = 100000;
    std::array<long, 5> fired{};
    for (int t = 0; t < trials; ++t) {
        Rng rng = root.derive("gate-pipeline", t);
        const PipelineResult out = apply_pipeline(params, frame, config, rng, &meta);
        fired[0] += out.provenance.fired_shape_aug;
        fired[1] += out.provenance.fired_flip;
        fired[2] += out.provenance.fired_occlude;
        fired[3] += out.provenance.fired_ghost;
        fired[4] += out.provenance.fired_shift;
    }
    const double expect[5] = {0.5, 0.5, 0.7, 0.7, 0.8};
    for (int s = 0; s < 5; ++s) {
        const double rate = fired[s] / double(trials);
        check.require(std::abs(rate - expect[s]) < 0.01,
                      "stage " + std::to_string(s) + " rate " + std::to_string(rate));
    }

    // Ghost Mahalanobis distances vs chi-squared(3), KS at the 0.01 level.
    Rng ghost_rng(90062);
    GhostResult probe = ghost(frame, ghost_rng, {1, 1});
    const Mat3 inv = probe.covariance.inverse();
    const int n = 100000;
    std::vector<double> d2;
    d2.reserve(n);
    while (static_cast<int>(d2.size()) < n) {
        const GhostResult g = ghost(frame, ghost_rng, {1, 1});
        const Vec3 diff = g.frame.points.back() - probe.center;
        d2.push_back(diff.dot(inv * diff));
    }
    std::sort(d2.begin(), d2.end());
    auto chi2_3_cdf = [](double x) {
        return std::erf(std::sqrt(x / 2.0)) - std::sqrt(2.0 * x / M_PI) * std::exp(-x / 2.0);
    };
    double ks = 0;
    for (int i = 0; i < n; ++i) {
        const double cdf = chi2_3_cdf(d2[i]);
        ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
        ks = std::max(ks, std::abs(cdf - double(i) / n));
    }
    const double ks_crit = 1.6276 / std::sqrt(double(n));
    check.require(ks < ks_crit,
                  "ghost KS " + std::to_string(ks) + " >= " + std::to_string(ks_crit));
    return check.ok;
}

// ---- criterion 7: balance properties --------------------------------------------------

bool criterion_balance(Check& check) {
    RelevanceConfig rc;
    rc.sigma = 0.4;
    for (double eps = 0.0; eps <= 8.0; eps += 0.01) {
        rc.variant = RelevanceVariant::exp1p;
        check.require(relevance(eps, rc) >= 1.0, "exp1p below 1");
        rc.variant = RelevanceVariant::sigmoid;
        const double s = relevance(eps, rc);
        check.require(s >= 1.0 && s < 2.0, "sigmoid outside [1,2)");
        rc.variant = RelevanceVariant::exp_clamped;
        const double c = relevance(eps, rc);
        check.require(c >= 1.0 && c <= 3.0, "exp_clamped outside [1,3]");
        if (!check.ok) return false;
    }
    rc.variant = RelevanceVariant::exp_clamped;
    check.require(relevance(1e6, rc) == 3.0, "exp_clamped cap != 3");

    Rng rng(90070);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec a = rng.normal_vec(8);
        const Vec b = rng.normal_vec(8);
        check.require((slerp(a, b, 0.0) - a).norm() < 1e-12, "slerp(0) != a");
        check.require((slerp(a, b, 1.0) - b).norm() < 1e-12, "slerp(1) != b");
        const Vec ua = a.normalized(), ub = b.normalized();
        for (double t = 0.0; t <= 1.0; t += 0.25)
            check.require(std::abs(slerp(ua, ub, t).norm() - 1.0) < 1e-12,
                          "slerp norm drift");
        if (!check.ok) return false;
    }

    // Constructed long-tail fixture: slerp-mode tail samples have strictly
    // higher reconstruction error than latent-prior samples.
    const BodyModel model = load_gate_model();
    Rng fx_rng(90071);
    const int dim = 3 * model.joint_count();
    Mat basis(dim, 4);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < 4; ++c) basis(r, c) = fx_rng.normal() * 0.08;
    std::vector<Vec> poses;
    for (int i = 0; i < 300; ++i) {
        Vec c(4);
        for (int k = 0; k < 4; ++k) c[k] = fx_rng.normal();
        poses.push_back(basis * c);
    }
    for (int i = 0; i < 12; ++i) {
        Vec t(dim);
        for (int k = 0; k < dim; ++k) t[k] = fx_rng.normal() * 0.45;
        poses.push_back(std::move(t));
    }
    auto pca = std::make_shared<PcaAutoencoder>(PcaAutoencoder::fit(poses, 8));
    const SaturatingAutoencoder ae(pca, (2.0 * pca->latent_scale().array() + 1e-3).matrix());
    const AnchorSet anchors = select_anchors(poses, ae, model, 2.0);
    check.require(anchors.anchors.size() >= 2, "fixture produced too few anchors");
    if (!check.ok) return false;

    SamplerConfig slerp_conf = default_sampler_config(ae);
    SamplerConfig random_conf = slerp_conf;
    random_conf.mode = BlendMode::random;
    Rng sample_rng(90072);
    const Vec beta = Vec::Zero(model.shape_dim());
    double eps_slerp = 0, eps_random = 0;
    const int n = 600;
    for (int i = 0; i < n; ++i) {
        eps_slerp += reconstruction_error(
            model, ae, sample_tail(anchors, ae, slerp_conf, sample_rng).theta, beta);
        eps_random += reconstruction_error(
            model, ae, sample_tail(anchors, ae, random_conf, sample_rng).theta, beta);
    }
    check.require(eps_slerp / n > eps_random / n,
                  "slerp mean eps " + std::to_string(eps_slerp / n) + " vs random " +
                      std::to_string(eps_random / n));
    return check.ok;
}

// ---- criterion 8: capture pipeline --------------------------------------------------

bool criterion_capture(Check& check) {
    const BodyModel model = load_gate_model();
    const LandmarkSet lm =
        landmarks_of(model, BodyParams::rest(model.shape_dim(), model.joint_count()));
    MarkerFrame scene;
    for (int i = 0; i < model.marker_count(); ++i) {
        scene.points.push_back(lm.positions.row(i).transpose());
        scene.labels.push_back(lm.labels[i]);
    }

    std::vector<Sensor> rig;
    for (int k = 0; k < 3; ++k) {
        Sensor s;
        s.id = k;
        s.width = 640;
        s.height = 576;
        s.intrinsics = Mat3::Identity();
        s.intrinsics(0, 0) = s.intrinsics(1, 1) = 600.0;
        s.intrinsics(0, 2) = 319.5;
        s.intrinsics(1, 2) = 287.5;
        const double angle = 2.0 * M_PI * k / 3.0;
        const Vec3 pos(2.2 * std::sin(angle), 1.1, 2.2 * std::cos(angle));
        const Vec3 fwd = (Vec3(0, 0.88, 0) - pos).normalized();
        const Vec3 right = Vec3::UnitY().cross(fwd).normalized();
        s.extrinsics.rotation.col(0) = right;
        s.extrinsics.rotation.col(1) = fwd.cross(right);
        s.extrinsics.rotation.col(2) = fwd;
        s.extrinsics.translation = pos;
        rig.push_back(s);
    }

    auto run_pipeline = [&](double depth_noise, std::uint64_t seed) {
        Rng rng(seed);
        SensorSimConfig sim;
        sim.depth_noise = depth_noise;
        std::vector<MarkerObservation> all;
        for (const auto& sensor : rig) {
            Rng srng = rng.derive("sensor-" + std::to_string(sensor.id));
            const SensorFrame frame = simulate_sensor(scene, sensor, sim, srng);
            for (const auto& blob : extract_blobs(frame.ir, 0.5)) {
                const auto obs = blob_to_marker(frame, sensor, blob);
                if (obs) all.push_back(*obs);
            }
        }
        return fuse_and_cluster(all, 0.01);
    };

    const MarkerFrame clean = run_pipeline(0.0, 90080);
    check.require(clean.size() == scene.size(),
                  "zero-noise cluster count " + std::to_string(clean.size()));
    double worst = 0;
    for (const auto& gt : scene.points) {
        double best = 1e9;
        for (const auto& p : clean.points) best = std::min(best, (p - gt).norm());
        worst = std::max(worst, best);
    }
    check.require(worst < 0.005,
                  "zero-noise worst marker error " + std::to_string(worst * 1000) + " mm");

    const MarkerFrame noisy = run_pipeline(0.002, 90081);
    double worst_noisy = 0;
    for (const auto& gt : scene.points) {
        double best = 1e9;
        for (const auto& p : noisy.points) best = std::min(best, (p - gt).norm());
        worst_noisy = std::max(worst_noisy, best);
    }
    check.require(worst_noisy < 0.015,
                  "2mm-noise worst marker error " + std::to_string(worst_noisy * 1000) + " mm");

    // Wand calibration: exact at zero noise, < 3 mm translation at 1 mm.
    Rng wand_rng(90082);
    std::vector<RigidTransform> gt_extr(3);
    gt_extr[0] = RigidTransform::identity();
    for (int k = 1; k < 3; ++k) {
        gt_extr[k].rotation = rodrigues(wand_rng.normal3() * 0.7);
        gt_extr[k].translation = wand_rng.normal3() * 1.8;
    }
    for (double noise : {0.0, 0.001}) {
        std::vector<WandTrack> tracks(3);
        for (int k = 0; k < 3; ++k) tracks[k].sensor_id = k;
        for (int t = 0; t < 200; ++t) {
            const Vec3 world(wand_rng.uniform(-1.5, 1.5), wand_rng.uniform(0.2, 2.2),
                             wand_rng.uniform(-1.5, 1.5));
            for (int k = 0; k < 3; ++k)
                tracks[k].samples[t] =
                    gt_extr[k].inverse().apply(world) + noise * wand_rng.normal3();
        }
        const CalibrationResult result = calibrate_wand(tracks);
        for (int k = 0; k < 3; ++k) {
            const double rot_err =
                rotation_geodesic(result.extrinsics[k].rotation, gt_extr[k].rotation);
            const double t_err =
                (result.extrinsics[k].translation - gt_extr[k].translation).norm();
            if (noise == 0.0) {
                check.require(rot_err < 1e-6, "zero-noise rotation error " +
                                                  std::to_string(rot_err));
                check.require(t_err < 1e-6, "zero-noise translation error " +
                                                std::to_string(t_err));
            } else {
                check.require(t_err < 0.003,
                              "noisy translation error " + std::to_string(t_err * 1000) + " mm");
            }
        }
    }

    // Gravity alignment of a 10-degree tilted L.
    const Mat3 tilt = rodrigues(Vec3(10.0 * M_PI / 180.0, 0, 0));
    const Vec3 pts[3] = {tilt * Vec3(0.2, 0, 0.1), tilt * Vec3(0.8, 0, 0.1),
                         tilt * Vec3(0.2, 0, 0.4)};
    const RigidTransform align = gravity_align(pts[0], pts[1], pts[2]);
    for (const auto& p : pts)
        check.require(std::abs(align.apply(p).y()) < 1e-9, "gravity-aligned y nonzero");
    return check.ok;
}

// ---- criterion 9: metric identities ---------------------------------------------------

bool criterion_metrics(Check& check) {
    Rng rng(90090);
    std::vector<Points> gt, est;
    for (int i = 0; i < 10; ++i) {
        Points a(8, 3), b(8, 3);
        for (int j = 0; j < 8; ++j) {
            a.row(j) = rng.normal3().transpose();
            b.row(j) = a.row(j) + (rng.normal3() * 0.02).transpose();
        }
        gt.push_back(a);
        est.push_back(b);
    }
    const double p1 = pck_percent(gt, est, 0.010);
    const double p3 = pck_percent(gt, est, 0.030);
    const double p7 = pck_percent(gt, est, 0.070);
    check.require(p1 <= p3 && p3 <= p7, "PCK not monotone in tau");

    double worst_mae = 0;
    for (double phi = 0.05; phi < M_PI; phi += 0.15) {
        const Mat3 base = rodrigues(rng.normal3());
        const Mat3 rotated = base * rodrigues(Vec3(phi, 0, 0));
        worst_mae = std::max(worst_mae, std::abs(mae_geodesic_degrees({{base}}, {{rotated}}) -
                                                 phi * 180.0 / M_PI));
    }
    check.require(worst_mae < 1e-9, "geodesic MAE deviation " + std::to_string(worst_mae));

    check.require(rmse3_indicator(20.0, 0.5) == 10.0, "rmse3 formula");
    check.require(rmse3_indicator(20.0, 1.0) == 0.0, "rmse3 at full pck3");
    const auto synth = synthesis_indicator(8.0, 16.0);
    check.require(synth.has_value() && *synth == 0.5, "synthesis formula");
    check.require(!synthesis_indicator(8.0, 0.0).has_value(), "synthesis with zero div");
    return check.ok;
}

// ---- criterion 10: CLI determinism -----------------------------------------------------

bool criterion_cli_determinism(Check& check) {
    const fs::path dir =
        fs::temp_directory_path() / ("mocap_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto path = [&](const std::string& name) { return (dir / name).string(); };
    auto run = [&](const std::string& args) {
        const std::string cmd = g_cli + " " + args + " >> " + path("log.txt") + " 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };

    const std::string model = g_data_dir + "/synthetic_body_53x18.json";
    check.require(fs::exists(model), "shipped model file missing: " + model);
    if (!check.ok) return false;

    for (const char* tag : {"a", "b"}) {
        const std::string t(tag);
        bool ok = true;
        ok &= run("synth --model " + model + " --random 8 --seed 7 --jobs 4 --poses-out " +
                  path("poses_" + t + ".jsonl") + " -o " + path("frames_" + t + ".jsonl"));
        ok &= run("corrupt --model " + model + " -i " + path("frames_" + t + ".jsonl") +
                  " --poses " + path("poses_" + t + ".jsonl") + " --seed 8 --jobs 4 -o " +
                  path("corrupt_" + t + ".jsonl"));
        ok &= run("synth --model " + model + " --random 90 --seed 9 --poses-out " +
                  path("prior_" + t + ".jsonl") + " -o " + path("prior_frames_" + t +
                  ".jsonl"));
        ok &= run("balance anchors --model " + model + " --poses " +
                  path("prior_" + t + ".jsonl") + " --latent 54 --pca-out " +
                  path("pca_" + t + ".json") + " --threshold-std 1.0 -o " +
                  path("anchors_" + t + ".json"));
        ok &= run("balance sample --pca " + path("pca_" + t + ".json") + " --anchors " +
                  path("anchors_" + t + ".json") + " -n 25 --seed 10 -o " +
                  path("sampled_" + t + ".jsonl"));
        ok &= run("fit --model " + model + " -i " + path("frames_" + t + ".jsonl") +
                  " --pca " + path("pca_" + t + ".json") + " --jobs 4 -o " +
                  path("fits_" + t + ".jsonl"));
        ok &= run("eval --model " + model + " --gt-poses " + path("poses_" + t + ".jsonl") +
                  " --est-fits " + path("fits_" + t + ".jsonl") + " -o " +
                  path("report_" + t + ".json"));
        ok &= run("render -i " + path("frames_" + t + ".jsonl") + " --jobs 4 -o " +
                  path("render_" + t));
        check.require(ok, "a CLI command failed (see " + path("log.txt") + ")");
        if (!ok) return false;
    }

    const char* pairs[][2] = {
        {"frames_a.jsonl", "frames_b.jsonl"},   {"poses_a.jsonl", "poses_b.jsonl"},
        {"corrupt_a.jsonl", "corrupt_b.jsonl"}, {"anchors_a.json", "anchors_b.json"},
        {"pca_a.json", "pca_b.json"},           {"sampled_a.jsonl", "sampled_b.jsonl"},
        {"fits_a.jsonl", "fits_b.jsonl"},       {"report_a.json", "report_b.json"},
        {"render_a/frame_3_xy.mgrd", "render_b/frame_3_xy.mgrd"},
    };
    for (const auto& pair : pairs) {
        const std::string a = slurp(path(pair[0]));
        const std::string b = slurp(path(pair[1]));
        check.require(!a.empty() && a == b,
                      std::string("outputs differ or empty: ") + pair[0]);
    }

    std::error_code ec;
    fs::remove_all(dir, ec);
    return check.ok;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];
    if (argc > 2) g_data_dir = argv[2];

    struct Criterion {
        int id;
        std::string name;
        std::function<bool(Check&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "forward-model oracles and rigid equivariance", criterion_forward},
        {2, "fitter round trip on 50 seeded frames", criterion_fit_round_trip},
        {3, "noise-aware fit beats plain under corruption", criterion_noise_aware},
        {4, "analytic gradients and sigma stationarity", criterion_gradients},
        {5, "heatmap encode/decode/fusion round trip", criterion_heatmaps},
        {6, "corruption firing rates and ghost distribution", criterion_corruption},
        {7, "relevance ranges, slerp properties, tail sampling", criterion_balance},
        {8, "capture, calibration and gravity alignment", criterion_capture},
        {9, "metric identities", criterion_metrics},
        {10, "CLI determinism across runs and workers", criterion_cli_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Check check;
        bool ok = false;
        std::string error;
        try {
            ok = criterion.run(check);
        } catch (const std::exception& e) {
            ok = false;
            error = e.what();
        }
        if (ok) {
            std::cout << "PASS criterion " << criterion.id << ": " << criterion.name << "\n";
        } else {
            ++failures;
            std::cout << "FAIL criterion " << criterion.id << ": " << criterion.name;
            if (!check.detail.str().empty()) std::cout << " [" << check.detail.str() << "]";
            if (!error.empty()) std::cout << " [exception: " << error << "]";
            std::cout << "\n";
        }
        std::cout.flush();
    }
    if (failures == 0)
        std::cout << "all criteria passed\n";
    else
        std::cout << failures << " criteria failed\n";
    return failures;
}
