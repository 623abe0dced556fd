#include "mocap/synthetic_body.hpp"

#include <map>
#include <stdexcept>

#include <Eigen/Dense>

namespace mocap {

namespace {

struct JointSpec {
    std::string name;
    std::string parent;  // empty for root
    Vec3 position;
};

using CapWeights = std::vector<std::pair<std::string, double>>;

struct BoxSpec {
    std::string role;  // blendshape region tag
    Vec3 a, b;         // cap centers
    Vec3 u;            // first cross axis
    double hu, hv;     // half extents along u and v = w x u
    CapWeights weights_a, weights_b;
    int first_vertex = -1;  // filled during emission
};

struct MarkerSpec {
    std::string name;
    Vec3 point;
    bool barycentric;  // false: exact vertex pick
};

// Eight corners: cap A at indices 0..3, cap B at 4..7, corner order
// (-u,-v), (+u,-v), (+u,+v), (-u,+v) within each cap.
void emit_box(BoxSpec& box, Points& vertices, Faces& faces, std::vector<int>& vertex_box) {
    const Vec3 w = (box.b - box.a).normalized();
    const Vec3 u = box.u.normalized();
    const Vec3 v = w.cross(u);
    const int base = static_cast<int>(vertices.rows());
    box.first_vertex = base;

    vertices.conservativeResize(base + 8, 3);
    const double su[4] = {-1, 1, 1, -1};
    const double sv[4] = {-1, -1, 1, 1};
    for (int c = 0; c < 4; ++c) {
        vertices.row(base + c) = (box.a + su[c] * box.hu * u + sv[c] * box.hv * v).transpose();
        vertices.row(base + 4 + c) = (box.b + su[c] * box.hu * u + sv[c] * box.hv * v).transpose();
    }
    const int box_id = static_cast<int>(vertex_box.size()) > 0 ? vertex_box.back() + 1 : 0;
    for (int c = 0; c < 8; ++c) vertex_box.push_back(box_id);

    const int tris[12][3] = {
        {0, 2, 1}, {0, 3, 2},  // cap A, outward -w
        {4, 5, 6}, {4, 6, 7},  // cap B, outward +w
        {0, 1, 5}, {0, 5, 4},  // side -v
        {1, 2, 6}, {1, 6, 5},  // side +u
        {2, 3, 7}, {2, 7, 6},  // side +v
        {3, 0, 4}, {3, 4, 7},  // side -u
    };
    const int fbase = static_cast<int>(faces.rows());
    faces.conservativeResize(fbase + 12, 3);
    for (int t = 0; t < 12; ++t)
        faces.row(fbase + t) << base + tris[t][0], base + tris[t][1], base + tris[t][2];
}

Vec3 mirror_x(const Vec3& p) { return Vec3(-p.x(), p.y(), p.z()); }

std::string mirror_name(const std::string& name) {
    std::string out = name;
    if (out.rfind("l_", 0) == 0)
        out = "r_" + out.substr(2);
    else if (!out.empty() && out[0] == 'L')
        out[0] = 'R';
    return out;
}

CapWeights mirror_weights(const CapWeights& w) {
    CapWeights out;
    for (const auto& [name, value] : w) out.emplace_back(mirror_name(name), value);
    return out;
}

}  // namespace

std::pair<int, Vec3> find_face_barycentric(const Points& vertices, const Faces& faces,
                                           const Vec3& point, double tol) {
    for (int f = 0; f < faces.rows(); ++f) {
        const Vec3 a = vertices.row(faces(f, 0)).transpose();
        const Vec3 b = vertices.row(faces(f, 1)).transpose();
        const Vec3 c = vertices.row(faces(f, 2)).transpose();
        Eigen::Matrix<double, 3, 2> edges;
        edges.col(0) = b - a;
        edges.col(1) = c - a;
        const Vec2 st = edges.colPivHouseholderQr().solve(point - a);
        const Vec3 residual = a + edges * st - point;
        if (residual.norm() > tol) continue;
        const double b1 = st[0], b2 = st[1], b0 = 1.0 - b1 - b2;
        if (b0 < -1e-9 || b1 < -1e-9 || b2 < -1e-9) continue;
        return {f, Vec3(b0, b1, b2)};
    }
    throw std::invalid_argument("find_face_barycentric: point is not on the mesh");
}

BodyModel make_synthetic_body(BodyLayout layout) {
    const bool extended = layout == BodyLayout::markers56_joints24;

    // --- skeleton -------------------------------------------------------
    std::vector<JointSpec> joints = {
        {"pelvis", "", {0, 0.96, 0}},   {"spine1", "pelvis", {0, 1.06, 0}},
        {"spine2", "spine1", {0, 1.17, 0}}, {"chest", "spine2", {0, 1.30, 0}},
        {"neck", "chest", {0, 1.46, 0}},    {"head", "neck", {0, 1.56, 0}},
    };
    const std::string shoulder_parent = extended ? "l_clav" : "chest";
    if (extended) {
        joints.push_back({"l_clav", "chest", {0.102, 1.46, 0}});
    }
    joints.push_back({"l_shoulder", shoulder_parent, {0.19, 1.42, 0}});
    joints.push_back({"l_elbow", "l_shoulder", {0.47, 1.42, 0}});
    joints.push_back({"l_wrist", "l_elbow", {0.72, 1.42, 0}});
    if (extended) joints.push_back({"l_hand", "l_wrist", {0.84, 1.42, 0}});
    {
        // Mirror the left arm chain onto the right side.
        const std::size_t arm_begin = 6;
        const std::size_t arm_end = joints.size();
        for (std::size_t i = arm_begin; i < arm_end; ++i) {
            JointSpec r = joints[i];
            r.name = mirror_name(r.name);
            r.parent = r.parent == "chest" ? "chest" : mirror_name(r.parent);
            r.position = mirror_x(r.position);
            joints.push_back(r);
        }
    }
    joints.push_back({"l_hip", "pelvis", {0.10, 0.92, 0}});
    joints.push_back({"l_knee", "l_hip", {0.10, 0.52, 0}});
    joints.push_back({"l_ankle", "l_knee", {0.10, 0.12, 0}});
    if (extended) joints.push_back({"l_foot", "l_ankle", {0.10, 0.06, 0.15}});
    {
        const std::size_t leg_begin = joints.size() - (extended ? 4 : 3);
        const std::size_t leg_end = joints.size();
        for (std::size_t i = leg_begin; i < leg_end; ++i) {
            JointSpec r = joints[i];
            r.name = mirror_name(r.name);
            r.parent = r.parent == "pelvis" ? "pelvis" : mirror_name(r.parent);
            r.position = mirror_x(r.position);
            joints.push_back(r);
        }
    }

    std::map<std::string, int> joint_index;
    for (std::size_t i = 0; i < joints.size(); ++i) joint_index[joints[i].name] = int(i);

    // --- box segments ----------------------------------------------------
    const std::string wrist_b = extended ? "l_hand" : "l_wrist";
    const std::string ankle_b = extended ? "l_foot" : "l_ankle";
    std::vector<BoxSpec> boxes = {
        {"hips", {0, 0.86, 0}, {0, 1.06, 0}, Vec3::UnitX(), 0.16, 0.09,
         {{"pelvis", 1.0}}, {{"pelvis", 0.5}, {"spine1", 0.5}}},
        {"waist", {0, 1.06, 0}, {0, 1.17, 0}, Vec3::UnitX(), 0.14, 0.085,
         {{"spine1", 1.0}}, {{"spine1", 0.5}, {"spine2", 0.5}}},
        {"chest", {0, 1.17, 0}, {0, 1.30, 0}, Vec3::UnitX(), 0.15, 0.09,
         {{"spine2", 1.0}}, {{"spine2", 0.5}, {"chest", 0.5}}},
        {"girdle", {0, 1.30, 0}, {0, 1.46, 0}, Vec3::UnitX(), 0.17, 0.08,
         {{"chest", 1.0}}, {{"chest", 0.5}, {"neck", 0.5}}},
        {"neck", {0, 1.46, 0}, {0, 1.56, 0}, Vec3::UnitX(), 0.05, 0.05,
         {{"neck", 1.0}}, {{"neck", 0.5}, {"head", 0.5}}},
        {"head", {0, 1.56, 0}, {0, 1.74, 0}, Vec3::UnitX(), 0.09, 0.10,
         {{"head", 1.0}}, {{"head", 1.0}}},
        {"upperarm_l", {0.19, 1.42, 0}, {0.47, 1.42, 0}, Vec3::UnitY(), 0.05, 0.05,
         {{"l_shoulder", 1.0}}, {{"l_shoulder", 0.5}, {"l_elbow", 0.5}}},
        {"forearm_l", {0.47, 1.42, 0}, {0.72, 1.42, 0}, Vec3::UnitY(), 0.04, 0.04,
         {{"l_elbow", 1.0}}, {{"l_elbow", 0.5}, {"l_wrist", 0.5}}},
        {"hand_l", {0.72, 1.42, 0}, {0.84, 1.42, 0}, Vec3::UnitY(), 0.02, 0.04,
         {{"l_wrist", 1.0}}, {{"l_wrist", 0.5}, {wrist_b, 0.5}}},
        {"thigh_l", {0.10, 0.92, 0}, {0.10, 0.52, 0}, Vec3::UnitX(), 0.07, 0.07,
         {{"l_hip", 1.0}}, {{"l_hip", 0.5}, {"l_knee", 0.5}}},
        {"shin_l", {0.10, 0.52, 0}, {0.10, 0.12, 0}, Vec3::UnitX(), 0.05, 0.05,
         {{"l_knee", 1.0}}, {{"l_knee", 0.5}, {"l_ankle", 0.5}}},
        {"foot_l", {0.10, 0.06, -0.05}, {0.10, 0.06, 0.15}, Vec3::UnitX(), 0.05, 0.05,
         {{"l_ankle", 1.0}}, {{"l_ankle", 0.5}, {ankle_b, 0.5}}},
    };
    // In the compact layout the hand/foot boxes stay bound to wrist/ankle.
    if (!extended) {
        boxes[8].weights_b = {{"l_wrist", 1.0}};
        boxes[11].weights_b = {{"l_ankle", 1.0}};
    }
    {
        const std::size_t n = boxes.size();
        for (std::size_t i = 6; i < n; ++i) {  // mirror limb boxes
            BoxSpec r = boxes[i];
            r.role = r.role.substr(0, r.role.size() - 2) + "_r";
            r.a = mirror_x(r.a);
            r.b = mirror_x(r.b);
            r.weights_a = mirror_weights(r.weights_a);
            r.weights_b = mirror_weights(r.weights_b);
            boxes.push_back(r);
        }
    }

    Points vertices(0, 3);
    Faces faces(0, 3);
    std::vector<int> vertex_box;
    for (auto& box : boxes) emit_box(box, vertices, faces, vertex_box);
    const int v_count = static_cast<int>(vertices.rows());
    const int p_count = static_cast<int>(joints.size());

    // --- skinning weights -------------------------------------------------
    Mat weights = Mat::Zero(v_count, p_count);
    for (const auto& box : boxes) {
        for (int c = 0; c < 4; ++c) {
            for (const auto& [name, w] : box.weights_a) weights(box.first_vertex + c, joint_index.at(name)) += w;
            for (const auto& [name, w] : box.weights_b) weights(box.first_vertex + 4 + c, joint_index.at(name)) += w;
        }
    }

    // --- joint regressor ---------------------------------------------------
    // Interior joints average the two coincident caps; chain ends use the
    // single adjacent cap. Clavicles blend the girdle top corners.
    Mat joint_reg = Mat::Zero(p_count, v_count);
    auto box_of = [&](const std::string& role) -> const BoxSpec& {
        for (const auto& b : boxes)
            if (b.role == role) return b;
        throw std::logic_error("missing box " + role);
    };
    auto add_cap = [&](const std::string& joint, const std::string& role, char cap, double total) {
        const BoxSpec& b = box_of(role);
        const int base = b.first_vertex + (cap == 'B' ? 4 : 0);
        for (int c = 0; c < 4; ++c) joint_reg(joint_index.at(joint), base + c) += total / 4.0;
    };
    auto add_sided = [&](const std::string& joint, const std::string& role, char cap, double total,
                         char side) {
        add_cap(side == 'l' ? joint : mirror_name(joint),
                side == 'l' ? role : role.substr(0, role.size() - 2) + "_r", cap, total);
    };
    add_cap("pelvis", "hips", 'A', 0.5);
    add_cap("pelvis", "hips", 'B', 0.5);
    add_cap("spine1", "hips", 'B', 0.5);
    add_cap("spine1", "waist", 'A', 0.5);
    add_cap("spine2", "waist", 'B', 0.5);
    add_cap("spine2", "chest", 'A', 0.5);
    add_cap("chest", "chest", 'B', 0.5);
    add_cap("chest", "girdle", 'A', 0.5);
    add_cap("neck", "girdle", 'B', 0.5);
    add_cap("neck", "neck", 'A', 0.5);
    add_cap("head", "neck", 'B', 0.5);
    add_cap("head", "head", 'A', 0.5);
    for (char side : {'l', 'r'}) {
        add_sided("l_shoulder", "upperarm_l", 'A', 1.0, side);
        add_sided("l_elbow", "upperarm_l", 'B', 0.5, side);
        add_sided("l_elbow", "forearm_l", 'A', 0.5, side);
        add_sided("l_wrist", "forearm_l", 'B', 0.5, side);
        add_sided("l_wrist", "hand_l", 'A', 0.5, side);
        add_sided("l_hip", "thigh_l", 'A', 1.0, side);
        add_sided("l_knee", "thigh_l", 'B', 0.5, side);
        add_sided("l_knee", "shin_l", 'A', 0.5, side);
        add_sided("l_ankle", "shin_l", 'B', 1.0, side);
        if (extended) {
            add_sided("l_hand", "hand_l", 'B', 1.0, side);
            add_sided("l_foot", "foot_l", 'B', 1.0, side);
        }
    }
    if (extended) {
        // Corner order within a cap is (-u,-v),(+u,-v),(+u,+v),(-u,+v).
        const BoxSpec& girdle = box_of("girdle");
        const double corner_w[4] = {0.1, 0.4, 0.4, 0.1};
        for (int c = 0; c < 4; ++c) {
            const int idx = girdle.first_vertex + 4 + c;
            joint_reg(joint_index.at("l_clav"), idx) += corner_w[c];
            joint_reg(joint_index.at("r_clav"), idx) += corner_w[3 - c];
        }
    }

    // --- shape blendshapes -------------------------------------------------
    const Vec3 pelvis_pos(0, 0.96, 0);
    const Vec3 head_pos(0, 1.56, 0);
    auto role_of = [&](int vi) -> const std::string& { return boxes[vertex_box[vi]].role; };
    auto is_torso = [](const std::string& r) {
        return r == "hips" || r == "waist" || r == "chest" || r == "girdle";
    };
    auto is_arm = [](const std::string& r) {
        return r.rfind("upperarm", 0) == 0 || r.rfind("forearm", 0) == 0 || r.rfind("hand", 0) == 0;
    };
    auto is_leg = [](const std::string& r) {
        return r.rfind("thigh", 0) == 0 || r.rfind("shin", 0) == 0 || r.rfind("foot", 0) == 0;
    };
    const int shape_dim = 8;
    std::vector<Points> blends(shape_dim, Points::Zero(v_count, 3));
    for (int k = 0; k < v_count; ++k) {
        const Vec3 p = vertices.row(k).transpose();
        const std::string& role = role_of(k);
        const double sx = p.x() >= 0 ? 1.0 : -1.0;
        blends[0].row(k) = 0.06 * (p - pelvis_pos).transpose();
        blends[1].row(k) = Vec3(0, 0.08 * (p.y() - pelvis_pos.y()), 0).transpose();
        if (is_torso(role)) blends[2].row(k) = Vec3(0.05 * p.x(), 0, 0.05 * p.z()).transpose();
        if (is_arm(role))
            blends[3].row(k) = Vec3(sx * 0.10 * (std::abs(p.x()) - 0.19), 0, 0).transpose();
        if (is_leg(role)) blends[4].row(k) = Vec3(0, -0.10 * (0.92 - p.y()), 0).transpose();
        if (role == "head") blends[5].row(k) = 0.3 * (p - head_pos).transpose();
        if (is_arm(role)) blends[6].row(k) = Vec3(sx * 0.04, 0, 0).transpose();
        if (role == "girdle")
            blends[6].row(k) = Vec3(sx * 0.04 * (std::abs(p.x()) / 0.17), 0, 0).transpose();
        if (role == "hips" || role == "waist" || role == "chest") {
            const double gate = std::max(0.0, 1.0 - std::abs(p.y() - 1.06) / 0.25);
            blends[7].row(k) = Vec3(0, 0, 0.06 * gate * (p.z() > 0 ? 1.0 : 0.3)).transpose();
        }
    }

    // --- landmarks -----------------------------------------------------------
    // Left-side and centerline markers; the right side is mirrored.
    const std::vector<MarkerSpec> left = {
        {"LFHD", {0.09, 1.74, 0.10}, false},  {"LBHD", {0.09, 1.74, -0.10}, false},
        {"LFSH", {0.17, 1.46, 0.0}, true},
        {"LASI", {0.10, 0.96, 0.09}, true},   {"LPSI", {0.06, 0.96, -0.09}, true},
        {"LSHO", {0.19, 1.47, 0.05}, false},  {"LUPA", {0.33, 1.47, 0.0}, true},
        {"LELB", {0.47, 1.46, -0.04}, false}, {"LFRM", {0.60, 1.46, 0.0}, true},
        {"LFRA", {0.66, 1.42, 0.04}, true},   {"LWRA", {0.72, 1.46, 0.04}, false},
        {"LWRB", {0.72, 1.46, -0.04}, false}, {"LFIN", {0.84, 1.42, 0.0}, true},
        {"LTHI", {0.17, 0.72, 0.0}, true},    {"LTHAP", {0.10, 0.82, 0.07}, true},
        {"LKNE", {0.15, 0.52, 0.05}, false},  {"LKNI", {0.05, 0.52, 0.05}, false},
        {"LTIB", {0.15, 0.32, 0.0}, true},    {"LANK", {0.15, 0.12, -0.05}, false},
        {"LHEE", {0.10, 0.06, -0.05}, true},  {"LTOE", {0.10, 0.06, 0.15}, true},
        {"LMT5", {0.15, 0.01, 0.15}, false},
    };
    // RBAK is deliberately single-sided, the usual asymmetry marker that
    // disambiguates left from right.
    const std::vector<MarkerSpec> unmirrored = {
        {"TPHD", {0, 1.74, 0}, true},      {"NECK", {0, 1.54, 0.05}, true},
        {"C7", {0, 1.46, -0.08}, true},    {"CLAV", {0, 1.46, 0.08}, true},
        {"STRN", {0, 1.30, 0.09}, true},   {"T10", {0, 1.17, -0.09}, true},
        {"UMBL", {0, 1.06, 0.085}, true},  {"SACR", {0, 0.88, -0.09}, true},
        {"RBAK", {-0.10, 1.38, -0.08}, true},
    };
    std::vector<MarkerSpec> markers;
    for (const auto& m : left) {
        markers.push_back(m);
        MarkerSpec r = m;
        r.name = mirror_name(r.name);
        r.point = mirror_x(r.point);
        markers.push_back(r);
    }
    markers.insert(markers.end(), unmirrored.begin(), unmirrored.end());
    if (extended) {
        const Vec3 hand_top(0.78, 1.44, 0.0);
        markers.push_back({"LHND", hand_top, true});
        markers.push_back({"RHND", mirror_x(hand_top), true});
        markers.push_back({"SPIN", {0, 1.11, -0.085}, true});
    }

    BodyModel model;
    model.template_vertices = vertices;
    model.faces = faces;
    model.shape_blendshapes = blends;
    model.skinning_weights = weights;
    model.joint_regressor = joint_reg;
    model.parents.resize(p_count);
    model.joint_names.resize(p_count);
    for (int j = 0; j < p_count; ++j) {
        model.joint_names[j] = joints[j].name;
        model.parents[j] = joints[j].parent.empty() ? -1 : joint_index.at(joints[j].parent);
    }
    model.marker_radius = 0.0095;

    const int l_count = static_cast<int>(markers.size()) + p_count;
    std::vector<Eigen::Triplet<double>> triplets;
    model.landmark_kinds.reserve(l_count);
    model.landmark_labels.reserve(l_count);
    model.landmark_extrude.reserve(l_count);
    model.landmark_bary_source.assign(l_count, std::nullopt);

    int row = 0;
    for (const auto& m : markers) {
        if (m.barycentric) {
            const auto [face, bary] = find_face_barycentric(vertices, faces, m.point);
            for (int e = 0; e < 3; ++e)
                if (bary[e] > 1e-12) triplets.emplace_back(row, faces(face, e), bary[e]);
            model.landmark_bary_source[row] = std::make_pair(face, bary);
        } else {
            int best = -1;
            double best_d = 1e9;
            for (int k = 0; k < v_count; ++k) {
                const double d = (vertices.row(k).transpose() - m.point).norm();
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            if (best_d > 1e-9)
                throw std::logic_error("synthetic body: marker " + m.name + " is not a vertex");
            triplets.emplace_back(row, best, 1.0);
        }
        model.landmark_kinds.push_back(LandmarkKind::marker);
        model.landmark_labels.push_back(m.name);
        model.landmark_extrude.push_back(true);
        ++row;
    }
    for (int j = 0; j < p_count; ++j) {
        for (int k = 0; k < v_count; ++k)
            if (joint_reg(j, k) != 0.0) triplets.emplace_back(row, k, joint_reg(j, k));
        model.landmark_kinds.push_back(LandmarkKind::joint);
        model.landmark_labels.push_back(joints[j].name);
        model.landmark_extrude.push_back(false);
        ++row;
    }
    model.landmark_regressor.resize(l_count, v_count);
    model.landmark_regressor.setFromTriplets(triplets.begin(), triplets.end());

    model.validate();
    return model;
}

}  // namespace mocap
