#pragma once

#include "mocap/body_model.hpp"

namespace mocap {

enum class BodyLayout {
    markers53_joints18,  // default layout
    markers56_joints24,  // alternate layout with clavicles, hands and feet
};

/// Procedurally built low-poly humanoid for tests, tools and fixtures:
/// box-segment mesh, 8 shape blendshapes, blended skinning weights and a
/// bilaterally symmetric marker layout. Deterministic.
BodyModel make_synthetic_body(BodyLayout layout = BodyLayout::markers53_joints18);

/// Locates the triangle containing a surface point and its barycentric
/// coordinates. Throws when the point is not on the mesh.
std::pair<int, Vec3> find_face_barycentric(const Points& vertices, const Faces& faces,
                                           const Vec3& point, double tol = 1e-9);

}  // namespace mocap
