#pragma once

#include <array>

#include "mocap/types.hpp"

namespace mocap {

/// Skew-symmetric cross-product matrix [v]x.
Mat3 skew(const Vec3& v);

/// Axis-angle to rotation matrix (Rodrigues). Falls back to the series
/// expansion below an angle of 1e-8 so gradients stay smooth through zero.
Mat3 rodrigues(const Vec3& axis_angle);

/// Derivatives dR/dw_a of rodrigues(w) for the three components, exact
/// away from zero, series at the origin.
std::array<Mat3, 3> rodrigues_jacobian(const Vec3& axis_angle);

/// Rotation matrix to axis-angle (inverse of rodrigues).
Vec3 axis_angle_from_rotation(const Mat3& rotation);

/// Geodesic angle between two rotations, radians in [0, pi].
double rotation_geodesic(const Mat3& a, const Mat3& b);

/// Least-squares rigid alignment dst ~= R * src + t (Kabsch). Throws if
/// fewer than 3 points or the point sets are degenerate (collinear).
RigidTransform kabsch(const Points& src, const Points& dst);

/// True when R is orthonormal with determinant +1 within tol.
bool is_rotation(const Mat3& r, double tol = 1e-9);

}  // namespace mocap
