#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mocap/capture.hpp"
#include "mocap/geometry.hpp"
#include "mocap/synthetic_body.hpp"
#include "test_util.hpp"

using namespace mocap;
using namespace mocap::testutil;

namespace {

Sensor make_sensor(int id, const RigidTransform& extrinsics) {
    Sensor s;
    s.id = id;
    s.width = 640;
    s.height = 576;
    s.intrinsics = Mat3::Identity();
    s.intrinsics(0, 0) = 600.0;
    s.intrinsics(1, 1) = 600.0;
    s.intrinsics(0, 2) = 319.5;
    s.intrinsics(1, 2) = 287.5;
    s.extrinsics = extrinsics;
    s.validate();
    return s;
}

// Ring of sensors looking at a body-center point from distance d.
std::vector<Sensor> make_ring_rig(int count, double distance, double height) {
    std::vector<Sensor> rig;
    for (int k = 0; k < count; ++k) {
        const double angle = 2.0 * M_PI * k / count;
        const Vec3 position(distance * std::sin(angle), height, distance * std::cos(angle));
        // Optical axis (+z in sensor frame) looks at the target point.
        const Vec3 forward = (Vec3(0, height * 0.8, 0) - position).normalized();
        const Vec3 right = Vec3::UnitY().cross(forward).normalized();
        const Vec3 down = forward.cross(right);
        RigidTransform tf;
        tf.rotation.col(0) = right;
        tf.rotation.col(1) = down;
        tf.rotation.col(2) = forward;
        tf.translation = position;
        rig.push_back(make_sensor(k, tf));
    }
    return rig;
}

MarkerFrame body_scene() {
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

}  // namespace

TEST_CASE("unproject inverts projection through the principal point") {
    const Sensor s = make_sensor(0, RigidTransform::identity());
    const Vec3 p = unproject(s, Vec2(319.5, 287.5), 2.0);
    CHECK((p - Vec3(0, 0, 2)).norm() < 1e-12);

    Rng rng(71);
    for (int i = 0; i < 50; ++i) {
        // In-frustum points built from a pixel and a depth.
        const Vec2 pixel(rng.uniform(0.0, 639.0), rng.uniform(0.0, 575.0));
        const Vec3 point = unproject(s, pixel, rng.uniform(0.5, 4.0));
        const auto px = project(s, point);
        REQUIRE(px.has_value());
        CHECK((*px - pixel).norm() < 1e-9);
        CHECK((unproject(s, *px, point.z()) - point).norm() < 1e-9);
    }
    CHECK_THROWS_AS(unproject(s, Vec2(0, 0), 0.0), std::invalid_argument);
    CHECK_FALSE(project(s, Vec3(0, 0, -1.0)).has_value());
}

TEST_CASE("blob extraction finds separated components and drops specks") {
    Mat ir = Mat::Zero(48, 64);
    ir.block(5, 5, 4, 4).setConstant(1.0);
    ir.block(30, 40, 3, 5).setConstant(1.0);
    ir(20, 20) = 1.0;  // single pixel, below min_area

    const auto blobs = extract_blobs(ir, 0.5, 3);
    REQUIRE(blobs.size() == 2);
    CHECK(blobs[0].size() == 16);
    CHECK(blobs[1].size() == 15);

    CHECK(extract_blobs(Mat::Zero(32, 32), 0.5).empty());

    // Diagonal touch merges under 8-connectivity.
    Mat diag = Mat::Zero(16, 16);
    diag(4, 4) = diag(5, 5) = diag(6, 6) = diag(3, 5) = 1.0;
    CHECK(extract_blobs(diag, 0.5, 3).size() == 1);
}

TEST_CASE("blob_to_marker averages the ring and rejects depth outliers") {
    const Sensor s = make_sensor(0, RigidTransform::identity());
    SensorFrame frame;
    frame.ir = Mat::Zero(s.height, s.width);
    frame.depth = Mat::Zero(s.height, s.width);

    // Uniform-depth blob: centroid of the unprojected samples.
    PixelBlob blob;
    for (int r = 100; r < 105; ++r)
        for (int c = 200; c < 205; ++c) {
            frame.ir(r, c) = 1.0;
            frame.depth(r, c) = 2.0;
            blob.emplace_back(r, c);
        }
    const auto obs = blob_to_marker(frame, s, blob);
    REQUIRE(obs.has_value());
    CHECK(obs->support == 25);
    Vec3 expected = Vec3::Zero();
    for (const auto& [r, c] : blob) expected += unproject(s, Vec2(c, r), 2.0);
    expected /= 25.0;
    CHECK((obs->position - expected).norm() < 1e-12);

    // One far-background pixel among consistent depths gets rejected.
    SensorFrame dirty = frame;
    PixelBlob dirty_blob;
    for (int i = 0; i < 21; ++i) {
        const int r = 300, c = 300 + i;
        dirty.ir(r, c) = 1.0;
        dirty.depth(r, c) = 2.0 + 0.001 * std::sin(i);  // ~consistent
        dirty_blob.emplace_back(r, c);
    }
    dirty.depth(300, 320) = 3.0;  // +1 m outlier
    const auto clean = blob_to_marker(dirty, s, dirty_blob);
    REQUIRE(clean.has_value());
    CHECK(clean->support == 20);
    Vec3 mean_clean = Vec3::Zero();
    for (int i = 0; i < 20; ++i)
        mean_clean += unproject(s, Vec2(300 + i, 300), dirty.depth(300, 300 + i));
    mean_clean /= 20.0;
    CHECK((clean->position - mean_clean).norm() < 1e-3);

    // Entirely invalid depth: dropped.
    SensorFrame invalid = frame;
    invalid.depth.setZero();
    CHECK_FALSE(blob_to_marker(invalid, s, blob).has_value());
}

TEST_CASE("fusion clustering merges nearby observations and is order independent") {
    Rng rng(72);

    // Single sensor: pass-through.
    std::vector<MarkerObservation> single;
    for (int i = 0; i < 5; ++i) single.push_back({Vec3(i, 0, 0), 0, 1});
    CHECK(fuse_and_cluster(single).size() == 5);

    // Three observations within 5 mm fuse to their centroid.
    std::vector<MarkerObservation> tight;
    const Vec3 base(0.5, 1.0, -0.3);
    Vec3 centroid = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        const Vec3 p = base + 0.004 * rng.normal3().normalized();
        tight.push_back({p, i, 1});
        centroid += p;
    }
    const MarkerFrame fused = fuse_and_cluster(tight);
    REQUIRE(fused.size() == 1);
    CHECK((fused.points[0] - centroid / 3.0).norm() < 1e-12);
    CHECK_FALSE(fused.labels[0].has_value());

    // Permutation invariance on a messy set.
    std::vector<MarkerObservation> messy;
    for (int i = 0; i < 40; ++i)
        messy.push_back({rng.normal3() * 0.5, i % 3, 1});
    const MarkerFrame a = fuse_and_cluster(messy);
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
        for (std::size_t i = messy.size(); i > 1; --i)
            std::swap(messy[i - 1], messy[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        const MarkerFrame b = fuse_and_cluster(messy);
        REQUIRE(b.size() == a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK((a.points[i] - b.points[i]).norm() == 0.0);
    }
}

TEST_CASE("wand calibration on a common-frame track is the identity") {
    Rng rng(73);
    std::vector<WandTrack> tracks(3);
    for (int k = 0; k < 3; ++k) tracks[k].sensor_id = k;
    for (int t = 0; t < 50; ++t) {
        const Vec3 p = rng.normal3();
        for (int k = 0; k < 3; ++k) tracks[k].samples[t] = p;
    }
    const CalibrationResult result = calibrate_wand(tracks);
    CHECK(result.residual < 1e-12);
    for (const auto& e : result.extrinsics) {
        CHECK((e.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(e.translation.norm() < 1e-10);
    }
}

TEST_CASE("wand calibration recovers synthetic extrinsics exactly at zero noise") {
    Rng rng(74);
    std::vector<RigidTransform> gt(3);
    gt[0] = RigidTransform::identity();
    for (int k = 1; k < 3; ++k) {
        gt[k].rotation = rodrigues(rng.normal3() * 0.8);
        gt[k].translation = rng.normal3() * 2.0;
    }
    std::vector<WandTrack> tracks(3);
    for (int k = 0; k < 3; ++k) tracks[k].sensor_id = k;
    for (int t = 0; t < 120; ++t) {
        const Vec3 world(rng.uniform(-1.5, 1.5), rng.uniform(0.2, 2.2), rng.uniform(-1.5, 1.5));
        for (int k = 0; k < 3; ++k) tracks[k].samples[t] = gt[k].inverse().apply(world);
    }
    const CalibrationResult result = calibrate_wand(tracks);
    for (int k = 0; k < 3; ++k) {
        CHECK(rotation_geodesic(result.extrinsics[k].rotation, gt[k].rotation) < 1e-6);
        CHECK((result.extrinsics[k].translation - gt[k].translation).norm() < 1e-6);
    }
    CHECK(result.residual < 1e-9);

    // Residual history never increases.
    for (std::size_t i = 1; i < result.residual_history.size(); ++i)
        CHECK(result.residual_history[i] <= result.residual_history[i - 1] + 1e-15);
}

TEST_CASE("wand calibration stays within 3 mm under 1 mm noise") {
    Rng rng(75);
    std::vector<RigidTransform> gt(3);
    gt[0] = RigidTransform::identity();
    for (int k = 1; k < 3; ++k) {
        gt[k].rotation = rodrigues(rng.normal3() * 0.6);
        gt[k].translation = rng.normal3() * 1.5;
    }
    std::vector<WandTrack> tracks(3);
    for (int k = 0; k < 3; ++k) tracks[k].sensor_id = k;
    for (int t = 0; t < 200; ++t) {
        const Vec3 world(rng.uniform(-1.5, 1.5), rng.uniform(0.2, 2.2), rng.uniform(-1.5, 1.5));
        for (int k = 0; k < 3; ++k)
            tracks[k].samples[t] = gt[k].inverse().apply(world) + 0.001 * rng.normal3();
    }
    const CalibrationResult result = calibrate_wand(tracks);
    for (int k = 1; k < 3; ++k)
        CHECK((result.extrinsics[k].translation - gt[k].translation).norm() < 0.003);
}

TEST_CASE("wand calibration rejects collinear sweeps and missing overlap") {
    std::vector<WandTrack> tracks(2);
    for (int t = 0; t < 30; ++t) {
        tracks[0].samples[t] = Vec3(t * 0.01, 0, 1);  // a straight line
        tracks[1].samples[t] = Vec3(0, t * 0.01, 1);
    }
    CHECK_THROWS_AS(calibrate_wand(tracks), std::invalid_argument);

    std::vector<WandTrack> disjoint(2);
    disjoint[0].samples[0] = Vec3(0, 0, 1);
    disjoint[0].samples[1] = Vec3(1, 0, 1);
    disjoint[1].samples[10] = Vec3(0, 1, 1);
    CHECK_THROWS_AS(calibrate_wand(disjoint), std::invalid_argument);
}

TEST_CASE("gravity alignment of an axis-aligned L is the identity rotation") {
    const Vec3 corner(0, 0, 0), long_end(0.6, 0, 0), short_end(0, 0, 0.3);
    const RigidTransform tf = gravity_align(corner, long_end, short_end);
    CHECK((tf.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(tf.translation.norm() < 1e-12);
}

TEST_CASE("gravity alignment flattens a tilted floor triple to y = 0") {
    const Mat3 tilt = rodrigues(Vec3(10.0 * M_PI / 180.0, 0, 0.05));
    const Vec3 shift(0.3, 0.8, -0.2);
    const Vec3 pts[3] = {tilt * Vec3(0, 0, 0) + shift, tilt * Vec3(0.6, 0, 0) + shift,
                         tilt * Vec3(0, 0, 0.3) + shift};
    const RigidTransform tf = gravity_align(pts[0], pts[1], pts[2]);
    for (const auto& p : pts) CHECK(std::abs(tf.apply(p).y()) < 1e-9);

    // Re-aligning already-aligned markers is the identity.
    const Vec3 flat[3] = {tf.apply(pts[0]), tf.apply(pts[1]), tf.apply(pts[2])};
    const RigidTransform again = gravity_align(flat[0], flat[1], flat[2]);
    CHECK((again.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(again.translation.norm() < 1e-9);
}

TEST_CASE("gravity alignment is independent of the marker order") {
    Rng rng(76);
    const Mat3 tilt = rodrigues(rng.normal3() * 0.2);
    const Vec3 pts[3] = {tilt * Vec3(0.1, 0.5, 0.1), tilt * Vec3(0.7, 0.5, 0.1),
                         tilt * Vec3(0.1, 0.5, 0.4)};
    const RigidTransform base = gravity_align(pts[0], pts[1], pts[2]);
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& perm : perms) {
        const RigidTransform tf = gravity_align(pts[perm[0]], pts[perm[1]], pts[perm[2]]);
        CHECK((tf.rotation - base.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((tf.translation - base.translation).norm() < 1e-9);
    }

    // Ambiguous edge lengths are refused.
    CHECK_THROWS_AS(gravity_align(Vec3(0, 0, 0), Vec3(0.5, 0, 0), Vec3(0, 0, 0.5)),
                    std::invalid_argument);
}

TEST_CASE("simulated sensor renders one centered blob per visible marker") {
    const Sensor s = make_sensor(0, RigidTransform::identity());
    MarkerFrame scene;
    scene.points.push_back(Vec3(0, 0, 2.0));  // on the optical axis
    scene.labels.push_back(std::nullopt);
    Rng rng(77);
    const SensorFrame frame = simulate_sensor(scene, s, SensorSimConfig{}, rng);
    const auto blobs = extract_blobs(frame.ir, 0.5);
    REQUIRE(blobs.size() == 1);
    const auto obs = blob_to_marker(frame, s, blobs[0]);
    REQUIRE(obs.has_value());
    CHECK((obs->position - Vec3(0, 0, 2.0)).norm() < 0.003);

    // A marker behind the sensor renders nothing.
    MarkerFrame behind;
    behind.points.push_back(Vec3(0, 0, -1.0));
    behind.labels.push_back(std::nullopt);
    const SensorFrame empty = simulate_sensor(behind, s, SensorSimConfig{}, rng);
    CHECK(extract_blobs(empty.ir, 0.5).empty());
}

TEST_CASE("three-sensor capture recovers the full marker set") {
    const MarkerFrame scene = body_scene();
    const std::vector<Sensor> rig = make_ring_rig(3, 2.2, 1.1);
    Rng rng(78);

    std::vector<MarkerObservation> all;
    for (const auto& sensor : rig) {
        const SensorFrame frame = simulate_sensor(scene, sensor, SensorSimConfig{}, rng);
        for (const auto& blob : extract_blobs(frame.ir, 0.5)) {
            const auto obs = blob_to_marker(frame, sensor, blob);
            if (obs) all.push_back(*obs);
        }
    }
    const MarkerFrame fused = fuse_and_cluster(all, 0.01);
    REQUIRE(fused.size() == scene.size());

    // Greedy matching: every true marker has a fused point within 5 mm.
    double worst = 0;
    for (const auto& gt : scene.points) {
        double best = 1e9;
        for (const auto& p : fused.points) best = std::min(best, (p - gt).norm());
        worst = std::max(worst, best);
    }
    CHECK(worst < 0.005);
}

TEST_CASE("rig json round trip") {
    const std::vector<Sensor> rig = make_ring_rig(3, 2.2, 1.0);
    const std::string path = "/tmp/mocap_test_rig.json";
    save_rig(rig, path);
    const std::vector<Sensor> back = load_rig(path);
    REQUIRE(back.size() == rig.size());
    for (std::size_t k = 0; k < rig.size(); ++k) {
        CHECK(back[k].id == rig[k].id);
        CHECK((back[k].intrinsics - rig[k].intrinsics).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((back[k].extrinsics.rotation - rig[k].extrinsics.rotation).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK((back[k].extrinsics.translation - rig[k].extrinsics.translation).norm() < 1e-12);
    }
    std::remove(path.c_str());
}
