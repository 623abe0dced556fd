#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mocap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// N x 3 point set, one row per point, SI meters.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
/// F x 3 triangle indices.
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;

/// Rigid transform q = R * p + t.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    Points apply(const Points& pts) const {
        Points out = pts * rotation.transpose();
        out.rowwise() += translation.transpose();
        return out;
    }

    RigidTransform compose(const RigidTransform& inner) const {
        return {rotation * inner.rotation, rotation * inner.translation + translation};
    }

    RigidTransform inverse() const {
        Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }
};

/// The solver's unknowns: shape coefficients, per-joint axis-angle
/// rotations (flattened 3P vector) and the global rigid transform.
struct BodyParams {
    Vec beta;
    Vec theta;
    RigidTransform root;

    static BodyParams rest(int shape_dim, int joint_count) {
        BodyParams p;
        p.beta = Vec::Zero(shape_dim);
        p.theta = Vec::Zero(3 * joint_count);
        return p;
    }
};

/// An unordered set of 3D marker observations. Labels are optional per
/// point; ghost detections carry none. Labels, when present, are unique
/// within a frame.
struct MarkerFrame {
    std::int64_t frame_id = 0;
    std::vector<Vec3> points;
    std::vector<std::optional<std::string>> labels;

    std::size_t size() const { return points.size(); }

    Points as_matrix() const {
        Points m(points.size(), 3);
        for (std::size_t i = 0; i < points.size(); ++i) m.row(i) = points[i];
        return m;
    }
};

enum class LandmarkKind { marker, joint };

/// Landmarks regressed from a posed mesh: markers and joints, in the
/// fixed order defined by the model file.
struct LandmarkSet {
    Points positions;
    std::vector<LandmarkKind> kinds;
    std::vector<std::string> labels;

    int count() const { return static_cast<int>(positions.rows()); }

    std::vector<int> indices_of(LandmarkKind kind) const {
        std::vector<int> idx;
        for (int i = 0; i < count(); ++i)
            if (kinds[i] == kind) idx.push_back(i);
        return idx;
    }
};

}  // namespace mocap
