#include "mocap/body_model.hpp"

#include <cmath>
#include <stdexcept>

#include "mocap/geometry.hpp"

namespace mocap {

int BodyModel::marker_count() const {
    int n = 0;
    for (auto k : landmark_kinds)
        if (k == LandmarkKind::marker) ++n;
    return n;
}

int BodyModel::joint_landmark_count() const {
    int n = 0;
    for (auto k : landmark_kinds)
        if (k == LandmarkKind::joint) ++n;
    return n;
}

std::vector<std::pair<int, int>> BodyModel::left_right_joint_pairs() const {
    if (joint_names.size() != static_cast<std::size_t>(joint_count()))
        throw std::invalid_argument("left_right_joint_pairs: model has no joint names");
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < joint_count(); ++i) {
        const std::string& name = joint_names[i];
        if (name.rfind("l_", 0) != 0) continue;
        const std::string mirrored = "r_" + name.substr(2);
        for (int j = 0; j < joint_count(); ++j) {
            if (joint_names[j] == mirrored) {
                pairs.emplace_back(i, j);
                break;
            }
        }
    }
    if (pairs.empty())
        throw std::invalid_argument("left_right_joint_pairs: no l_/r_ joint pairs found");
    return pairs;
}

void BodyModel::validate() const {
    const int v = vertex_count();
    const int p = joint_count();
    if (v == 0 || p == 0) throw std::invalid_argument("model: empty");
    if (skinning_weights.rows() != v || skinning_weights.cols() != p)
        throw std::invalid_argument("model: skinning weight shape mismatch");
    if (joint_regressor.rows() != p || joint_regressor.cols() != v)
        throw std::invalid_argument("model: joint regressor shape mismatch");
    for (const auto& bs : shape_blendshapes)
        if (bs.rows() != v) throw std::invalid_argument("model: blendshape shape mismatch");
    if (faces.size() > 0 && (faces.minCoeff() < 0 || faces.maxCoeff() >= v))
        throw std::invalid_argument("model: face index out of range");

    for (int i = 0; i < v; ++i) {
        if (skinning_weights.row(i).minCoeff() < -1e-12)
            throw std::invalid_argument("model: negative skinning weight");
        if (std::abs(skinning_weights.row(i).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("model: skinning weight row does not sum to 1");
    }
    for (int j = 0; j < p; ++j)
        if (std::abs(joint_regressor.row(j).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("model: joint regressor row does not sum to 1");

    int roots = 0;
    for (int j = 0; j < p; ++j) {
        if (parents[j] < 0) {
            ++roots;
            continue;
        }
        // Parents must precede children, which also rules out cycles.
        if (parents[j] >= j)
            throw std::invalid_argument("model: joints must be ordered parents-first");
    }
    if (roots != 1) throw std::invalid_argument("model: kinematic tree must have exactly one root");

    const int l = landmark_count();
    if (static_cast<int>(landmark_kinds.size()) != l ||
        static_cast<int>(landmark_labels.size()) != l ||
        static_cast<int>(landmark_extrude.size()) != l)
        throw std::invalid_argument("model: landmark metadata length mismatch");
    if (!landmark_bary_source.empty() && static_cast<int>(landmark_bary_source.size()) != l)
        throw std::invalid_argument("model: landmark bary source length mismatch");
    if (landmark_regressor.cols() != v)
        throw std::invalid_argument("model: landmark regressor width mismatch");
    for (int i = 0; i < l; ++i) {
        double sum = 0;
        int nnz = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(landmark_regressor, i);
             it; ++it) {
            sum += it.value();
            ++nnz;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("model: landmark row does not sum to 1");
        if (landmark_kinds[i] == LandmarkKind::marker && nnz > 3 && landmark_extrude[i])
            throw std::invalid_argument("model: marker row must be a vertex pick or barycentric");
    }
}

static void check_dimensions(const BodyModel& model, const BodyParams& params) {
    if (params.beta.size() != model.shape_dim())
        throw std::invalid_argument("skin: beta dimension does not match model");
    if (params.theta.size() != 3 * model.joint_count())
        throw std::invalid_argument("skin: theta dimension does not match model");
    if (!params.beta.allFinite() || !params.theta.allFinite())
        throw std::invalid_argument("skin: non-finite parameters");
}

KinematicState skin_detailed(const BodyModel& model, const BodyParams& params) {
    check_dimensions(model, params);
    const int v = model.vertex_count();
    const int p = model.joint_count();

    KinematicState st;
    st.shaped_vertices = model.template_vertices;
    for (int s = 0; s < model.shape_dim(); ++s)
        st.shaped_vertices += params.beta[s] * model.shape_blendshapes[s];

    st.rest_joints = model.joint_regressor * st.shaped_vertices;

    st.global_rot.resize(p);
    st.global_trans.resize(p, 3);
    for (int j = 0; j < p; ++j) {
        const Mat3 local = rodrigues(params.theta.segment<3>(3 * j));
        const int par = model.parents[j];
        if (par < 0) {
            st.global_rot[j] = local;
            st.global_trans.row(j) = st.rest_joints.row(j);
        } else {
            st.global_rot[j] = st.global_rot[par] * local;
            st.global_trans.row(j) =
                (st.global_rot[par] * (st.rest_joints.row(j) - st.rest_joints.row(par)).transpose())
                    .transpose() +
                st.global_trans.row(par);
        }
    }

    st.posed_vertices.resize(v, 3);
    for (int k = 0; k < v; ++k) {
        Vec3 acc = Vec3::Zero();
        const Vec3 u = st.shaped_vertices.row(k).transpose();
        for (int j = 0; j < p; ++j) {
            const double w = model.skinning_weights(k, j);
            if (w == 0.0) continue;
            acc += w * (st.global_rot[j] * (u - st.rest_joints.row(j).transpose()) +
                        st.global_trans.row(j).transpose());
        }
        st.posed_vertices.row(k) = params.root.apply(acc).transpose();
    }
    return st;
}

MeshSurface skin(const BodyModel& model, const BodyParams& params) {
    MeshSurface mesh;
    mesh.vertices = skin_detailed(model, params).posed_vertices;
    mesh.faces = model.faces;
    return mesh;
}

VertexNormals vertex_normals(const MeshSurface& mesh) {
    const int v = static_cast<int>(mesh.vertices.rows());
    if (v == 0 || mesh.faces.rows() == 0)
        throw std::invalid_argument("vertex_normals: empty mesh");
    if (mesh.faces.minCoeff() < 0 || mesh.faces.maxCoeff() >= v)
        throw std::invalid_argument("vertex_normals: face index out of range");

    VertexNormals out;
    out.normals = Points::Zero(v, 3);
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        const Vec3 a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        const Vec3 b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        const Vec3 c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        // |cross| = 2 * area, so accumulating the raw cross product is the
        // area weighting.
        const Vec3 fn = (b - a).cross(c - a);
        for (int e = 0; e < 3; ++e) out.normals.row(mesh.faces(f, e)) += fn.transpose();
    }
    for (int k = 0; k < v; ++k) {
        const double len = out.normals.row(k).norm();
        if (len < 1e-14) {
            out.normals.row(k).setZero();
            out.zero_area_vertices.push_back(k);
        } else {
            out.normals.row(k) /= len;
        }
    }
    return out;
}

LandmarkSet extract_landmarks(const BodyModel& model, const MeshSurface& mesh,
                              const Points& normals) {
    if (mesh.vertices.rows() != model.vertex_count() || normals.rows() != model.vertex_count())
        throw std::invalid_argument("extract_landmarks: mesh does not match model");

    LandmarkSet set;
    set.positions = model.landmark_regressor * mesh.vertices;
    const Points regressed_normals = model.landmark_regressor * normals;
    for (int i = 0; i < model.landmark_count(); ++i) {
        if (!model.landmark_extrude[i]) continue;
        const double len = regressed_normals.row(i).norm();
        if (len < 1e-14) continue;  // degenerate normal, no extrusion
        set.positions.row(i) += model.marker_radius / len * regressed_normals.row(i);
    }
    set.kinds = model.landmark_kinds;
    set.labels = model.landmark_labels;
    return set;
}

LandmarkSet landmarks_of(const BodyModel& model, const BodyParams& params) {
    const MeshSurface mesh = skin(model, params);
    const VertexNormals vn = vertex_normals(mesh);
    return extract_landmarks(model, mesh, vn.normals);
}

}  // namespace mocap
