#include <doctest.h>

#include <Eigen/Geometry>

#include "mocap/geometry.hpp"
#include "mocap/rng.hpp"

using namespace mocap;

TEST_CASE("rodrigues matches Eigen AngleAxis") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const Vec3 w = rng.normal3() * rng.uniform(0.0, 3.0);
        const double angle = w.norm();
        Mat3 ref = Mat3::Identity();
        if (angle > 0) ref = Eigen::AngleAxisd(angle, (w / angle).eval()).toRotationMatrix();
        CHECK((rodrigues(w) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("rodrigues small-angle series is smooth and orthonormal") {
    for (double eps : {0.0, 1e-12, 1e-9, 1e-8}) {
        const Mat3 r = rodrigues(Vec3(eps, -eps, eps / 2));
        CHECK(is_rotation(r, 1e-12));
    }
}

TEST_CASE("rodrigues_jacobian matches central differences") {
    Rng rng(12);
    const double h = 1e-6;
    for (int i = 0; i < 25; ++i) {
        const Vec3 w = i == 0 ? Vec3::Zero() : Vec3(rng.normal3() * rng.uniform(0.1, 2.0));
        const auto jac = rodrigues_jacobian(w);
        for (int a = 0; a < 3; ++a) {
            Vec3 wp = w, wm = w;
            wp[a] += h;
            wm[a] -= h;
            const Mat3 fd = (rodrigues(wp) - rodrigues(wm)) / (2 * h);
            CHECK((jac[a] - fd).cwiseAbs().maxCoeff() < 1e-7);
        }
    }
}

TEST_CASE("axis angle round trip") {
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const Vec3 w = rng.normal3().normalized() * rng.uniform(1e-6, M_PI - 1e-6);
        const Vec3 back = axis_angle_from_rotation(rodrigues(w));
        CHECK((back - w).norm() < 1e-9);
    }
    // Near-pi rotations go through the degenerate branch.
    const Vec3 w = Vec3(1, 0.2, -0.3).normalized() * (M_PI - 1e-9);
    const Mat3 r = rodrigues(w);
    CHECK((rodrigues(axis_angle_from_rotation(r)) - r).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rotation_geodesic of a known twist") {
    const Mat3 a = Mat3::Identity();
    for (double phi : {0.1, 1.0, 2.5}) {
        const Mat3 b = rodrigues(Vec3(0, phi, 0));
        CHECK(rotation_geodesic(a, b) == doctest::Approx(phi).epsilon(1e-12));
    }
}

TEST_CASE("kabsch recovers a random rigid transform") {
    Rng rng(14);
    for (int i = 0; i < 20; ++i) {
        Points src(6, 3);
        for (int k = 0; k < 6; ++k) src.row(k) = rng.normal3().transpose();
        RigidTransform gt;
        gt.rotation = rodrigues(rng.normal3());
        gt.translation = rng.normal3();
        const Points dst = gt.apply(src);
        const RigidTransform est = kabsch(src, dst);
        CHECK((est.rotation - gt.rotation).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((est.translation - gt.translation).norm() < 1e-10);
    }
}

TEST_CASE("kabsch rejects collinear input") {
    Points src(3, 3), dst(3, 3);
    for (int k = 0; k < 3; ++k) {
        src.row(k) << k, 0, 0;
        dst.row(k) << 0, k, 0;
    }
    CHECK_THROWS_AS(kabsch(src, dst), std::invalid_argument);
}

TEST_CASE("rigid transform compose and inverse") {
    Rng rng(15);
    RigidTransform a, b;
    a.rotation = rodrigues(rng.normal3());
    a.translation = rng.normal3();
    b.rotation = rodrigues(rng.normal3());
    b.translation = rng.normal3();
    const Vec3 p = rng.normal3();
    CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
}
