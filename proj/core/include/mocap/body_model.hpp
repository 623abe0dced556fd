#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "mocap/types.hpp"

namespace mocap {

/// Minimal parametric body: blendshape deformation, linear blend
/// skinning, linear landmark regression and marker extrusion along
/// surface normals. Immutable after load and safe to share across
/// threads; every operation on it is pure.
struct BodyModel {
    Points template_vertices;               // V x 3
    Faces faces;                            // F x 3
    std::vector<Points> shape_blendshapes;  // S entries, each V x 3
    Mat skinning_weights;                   // V x P, rows sum to 1
    Mat joint_regressor;                    // P x V, rows sum to 1
    std::vector<int> parents;               // P, root = -1
    std::vector<std::string> joint_names;   // P (may be empty)

    Eigen::SparseMatrix<double, Eigen::RowMajor> landmark_regressor;  // L x V
    std::vector<LandmarkKind> landmark_kinds;
    std::vector<std::string> landmark_labels;
    std::vector<bool> landmark_extrude;
    /// (face, barycentric) origin of rows that were specified on a
    /// triangle; resolved to vertex weights at load time, kept so saving
    /// round-trips.
    std::vector<std::optional<std::pair<int, Vec3>>> landmark_bary_source;

    double marker_radius = 0.0095;

    int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
    int face_count() const { return static_cast<int>(faces.rows()); }
    int shape_dim() const { return static_cast<int>(shape_blendshapes.size()); }
    int joint_count() const { return static_cast<int>(parents.size()); }
    int landmark_count() const { return static_cast<int>(landmark_regressor.rows()); }
    int marker_count() const;
    int joint_landmark_count() const;

    /// Index pairs (left, right) derived from l_/r_ joint name prefixes.
    /// Throws when joint names are missing.
    std::vector<std::pair<int, int>> left_right_joint_pairs() const;

    /// Checks the structural invariants (weight row sums, acyclic tree
    /// with one root, landmark row structure). Throws on violation.
    void validate() const;
};

struct MeshSurface {
    Points vertices;  // V x 3, posed
    Faces faces;
};

/// Intermediate kinematic quantities of one skinning evaluation, kept for
/// reuse by gradient code.
struct KinematicState {
    Points shaped_vertices;        // template + blendshapes
    Points rest_joints;            // P x 3
    std::vector<Mat3> global_rot;  // per joint, before root
    Points global_trans;           // P x 3
    Points posed_vertices;         // V x 3, root applied
};

/// Poses the model: vertices = root o LBS(template + sum beta_s * B_s,
/// joint transforms from theta). Deterministic; throws on dimension
/// mismatch between params and model.
MeshSurface skin(const BodyModel& model, const BodyParams& params);

/// skin() with all intermediates exposed.
KinematicState skin_detailed(const BodyModel& model, const BodyParams& params);

struct VertexNormals {
    Points normals;                       // V x 3, unit (or zero when flagged)
    std::vector<int> zero_area_vertices;  // vertices with no supporting area
};

/// Area-weighted face-normal accumulation, normalized per vertex.
/// Vertices incident only to zero-area faces get a zero normal and are
/// flagged. Throws on an empty mesh.
VertexNormals vertex_normals(const MeshSurface& mesh);

/// Regresses landmarks from a posed mesh. Markers are extruded by the
/// marker radius along the re-normalized regressed normal; joints are the
/// plain regression. The mesh and normals must come from the same model.
LandmarkSet extract_landmarks(const BodyModel& model, const MeshSurface& mesh,
                              const Points& normals);

/// Convenience: skin + normals + extract in one call.
LandmarkSet landmarks_of(const BodyModel& model, const BodyParams& params);

}  // namespace mocap
