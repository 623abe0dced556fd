#include "mocap/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "lbfgs.hpp"
#include "mocap/geometry.hpp"

namespace mocap {

namespace {

constexpr double kTinyNorm = 1e-12;

// ---- forward pass with analytic landmark Jacobians --------------------------

struct ForwardEval {
    Points landmarks;       // L x 3
    std::vector<Mat> jac;   // per landmark 3 x (S + 3P + 6), columns
                            // [beta | theta | omega | t]; empty without jac
};

ForwardEval forward(const BodyModel& model, const Vec& beta, const Vec& theta, const Vec3& omega,
                    const Vec3& root_t, bool with_jacobian) {
    const int v_count = model.vertex_count();
    const int p_count = model.joint_count();
    const int s_count = model.shape_dim();
    const int n_theta = 3 * p_count;
    const int n_cols = s_count + n_theta + 6;
    const int theta_off = s_count;
    const int omega_off = s_count + n_theta;
    const int t_off = omega_off + 3;

    // Shape and rest skeleton.
    Points shaped = model.template_vertices;
    for (int s = 0; s < s_count; ++s) shaped += beta[s] * model.shape_blendshapes[s];
    const Points rest_joints = model.joint_regressor * shaped;

    std::vector<Mat> djoint_dbeta(s_count);  // P x 3 each
    if (with_jacobian)
        for (int s = 0; s < s_count; ++s)
            djoint_dbeta[s] = model.joint_regressor * model.shape_blendshapes[s];

    // Kinematic chain.
    std::vector<Mat3> local_rot(p_count);
    std::vector<std::array<Mat3, 3>> local_rot_jac(p_count);
    for (int j = 0; j < p_count; ++j) {
        const Vec3 w = theta.segment<3>(3 * j);
        local_rot[j] = rodrigues(w);
        if (with_jacobian) local_rot_jac[j] = rodrigues_jacobian(w);
    }

    std::vector<Mat3> global_rot(p_count);
    Points global_t(p_count, 3);
    for (int j = 0; j < p_count; ++j) {
        const int par = model.parents[j];
        if (par < 0) {
            global_rot[j] = local_rot[j];
            global_t.row(j) = rest_joints.row(j);
        } else {
            global_rot[j] = global_rot[par] * local_rot[j];
            global_t.row(j) = (global_rot[par] *
                               (rest_joints.row(j) - rest_joints.row(par)).transpose())
                                  .transpose() +
                              global_t.row(par);
        }
    }

    // d global translation / d beta_s (rotations are beta-independent).
    std::vector<Mat> dgt_dbeta;  // s_count entries, P x 3
    if (with_jacobian) {
        dgt_dbeta.assign(s_count, Mat::Zero(p_count, 3));
        for (int s = 0; s < s_count; ++s) {
            for (int j = 0; j < p_count; ++j) {
                const int par = model.parents[j];
                if (par < 0) {
                    dgt_dbeta[s].row(j) = djoint_dbeta[s].row(j);
                } else {
                    dgt_dbeta[s].row(j) =
                        (global_rot[par] *
                         (djoint_dbeta[s].row(j) - djoint_dbeta[s].row(par)).transpose())
                            .transpose() +
                        dgt_dbeta[s].row(par);
                }
            }
        }
    }

    // d global transform / d theta_{q,a}: nonzero on the subtree of q.
    std::vector<std::vector<Mat3>> dq_rot;   // [3q+a][joint]
    std::vector<Mat> dq_trans;               // [3q+a] -> P x 3
    std::vector<std::vector<bool>> in_subtree(p_count, std::vector<bool>(p_count, false));
    if (with_jacobian) {
        for (int q = 0; q < p_count; ++q) {
            in_subtree[q][q] = true;
            for (int j = q + 1; j < p_count; ++j) {
                const int par = model.parents[j];
                if (par >= 0 && in_subtree[q][par]) in_subtree[q][j] = true;
            }
        }
        dq_rot.assign(n_theta, std::vector<Mat3>(p_count, Mat3::Zero()));
        dq_trans.assign(n_theta, Mat::Zero(p_count, 3));
        for (int q = 0; q < p_count; ++q) {
            const int par_q = model.parents[q];
            for (int a = 0; a < 3; ++a) {
                const int dir = 3 * q + a;
                dq_rot[dir][q] = par_q < 0 ? local_rot_jac[q][a]
                                           : Mat3(global_rot[par_q] * local_rot_jac[q][a]);
                for (int j = q + 1; j < p_count; ++j) {
                    if (!in_subtree[q][j]) continue;
                    const int par = model.parents[j];
                    dq_rot[dir][j] = dq_rot[dir][par] * local_rot[j];
                    dq_trans[dir].row(j) =
                        (dq_rot[dir][par] *
                         (rest_joints.row(j) - rest_joints.row(par)).transpose())
                            .transpose() +
                        dq_trans[dir].row(par);
                }
            }
        }
    }

    // Skinned vertices before the root transform, then root applied.
    const Mat3 root_rot = rodrigues(omega);
    const std::array<Mat3, 3> root_rot_jac =
        with_jacobian ? rodrigues_jacobian(omega) : std::array<Mat3, 3>{};

    Points posed(v_count, 3);
    Mat vertex_jac;  // (3 v_count) x n_cols
    if (with_jacobian) vertex_jac = Mat::Zero(3 * v_count, n_cols);

    for (int k = 0; k < v_count; ++k) {
        const Vec3 u = shaped.row(k).transpose();
        Vec3 x = Vec3::Zero();
        for (int j = 0; j < p_count; ++j) {
            const double w = model.skinning_weights(k, j);
            if (w == 0.0) continue;
            x += w * (global_rot[j] * (u - rest_joints.row(j).transpose()) +
                      global_t.row(j).transpose());
        }
        posed.row(k) = (root_rot * x + root_t).transpose();

        if (!with_jacobian) continue;
        auto block = vertex_jac.block(3 * k, 0, 3, n_cols);
        for (int j = 0; j < p_count; ++j) {
            const double w = model.skinning_weights(k, j);
            if (w == 0.0) continue;
            const Vec3 lever = u - rest_joints.row(j).transpose();
            for (int s = 0; s < s_count; ++s) {
                const Vec3 du = model.shape_blendshapes[s].row(k).transpose();
                const Vec3 dj = djoint_dbeta[s].row(j).transpose();
                block.col(s) += w * (global_rot[j] * (du - dj) + dgt_dbeta[s].row(j).transpose());
            }
            for (int q = 0; q < p_count; ++q) {
                if (!in_subtree[q][j]) continue;
                for (int a = 0; a < 3; ++a) {
                    const int dir = 3 * q + a;
                    block.col(theta_off + dir) +=
                        w * (dq_rot[dir][j] * lever + dq_trans[dir].row(j).transpose());
                }
            }
        }
        // Rotate the beta/theta columns into the root frame, then the root
        // derivatives themselves.
        block.leftCols(omega_off) = root_rot * block.leftCols(omega_off);
        for (int a = 0; a < 3; ++a) block.col(omega_off + a) = root_rot_jac[a] * x;
        block.block(0, t_off, 3, 3).setIdentity();
    }

    // Area-weighted normal accumulators and their Jacobians.
    const int f_count = model.face_count();
    Points accum = Points::Zero(v_count, 3);
    Mat accum_jac;
    if (with_jacobian) accum_jac = Mat::Zero(3 * v_count, n_cols);
    for (int f = 0; f < f_count; ++f) {
        const int i0 = model.faces(f, 0), i1 = model.faces(f, 1), i2 = model.faces(f, 2);
        const Vec3 y0 = posed.row(i0).transpose();
        const Vec3 e1 = posed.row(i1).transpose() - y0;
        const Vec3 e2 = posed.row(i2).transpose() - y0;
        const Vec3 cross = e1.cross(e2);
        accum.row(i0) += cross.transpose();
        accum.row(i1) += cross.transpose();
        accum.row(i2) += cross.transpose();
        if (!with_jacobian) continue;
        const Mat d1 = vertex_jac.block(3 * i1, 0, 3, n_cols) -
                       vertex_jac.block(3 * i0, 0, 3, n_cols);
        const Mat d2 = vertex_jac.block(3 * i2, 0, 3, n_cols) -
                       vertex_jac.block(3 * i0, 0, 3, n_cols);
        const Mat dcross = -skew(e2) * d1 + skew(e1) * d2;
        accum_jac.block(3 * i0, 0, 3, n_cols) += dcross;
        accum_jac.block(3 * i1, 0, 3, n_cols) += dcross;
        accum_jac.block(3 * i2, 0, 3, n_cols) += dcross;
    }

    Points normals(v_count, 3);
    Mat normal_jac;
    if (with_jacobian) normal_jac = Mat::Zero(3 * v_count, n_cols);
    for (int k = 0; k < v_count; ++k) {
        const Vec3 a = accum.row(k).transpose();
        const double len = a.norm();
        if (len < 1e-14) {
            normals.row(k).setZero();
            continue;
        }
        const Vec3 n = a / len;
        normals.row(k) = n.transpose();
        if (with_jacobian)
            normal_jac.block(3 * k, 0, 3, n_cols) =
                (Mat3::Identity() - n * n.transpose()) / len *
                accum_jac.block(3 * k, 0, 3, n_cols);
    }

    // Landmark assembly, matching extract_landmarks.
    const int l_count = model.landmark_count();
    ForwardEval out;
    out.landmarks.resize(l_count, 3);
    if (with_jacobian) out.jac.assign(l_count, Mat::Zero(3, n_cols));
    for (int l = 0; l < l_count; ++l) {
        Vec3 base = Vec3::Zero();
        Vec3 m = Vec3::Zero();
        Mat jac_base, jac_m;
        if (with_jacobian) {
            jac_base = Mat::Zero(3, n_cols);
            jac_m = Mat::Zero(3, n_cols);
        }
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
                 model.landmark_regressor, l);
             it; ++it) {
            const int k = static_cast<int>(it.col());
            base += it.value() * posed.row(k).transpose();
            if (model.landmark_extrude[l]) m += it.value() * normals.row(k).transpose();
            if (with_jacobian) {
                jac_base += it.value() * vertex_jac.block(3 * k, 0, 3, n_cols);
                if (model.landmark_extrude[l])
                    jac_m += it.value() * normal_jac.block(3 * k, 0, 3, n_cols);
            }
        }
        Vec3 pos = base;
        if (model.landmark_extrude[l]) {
            const double len = m.norm();
            if (len >= 1e-14) {
                pos += model.marker_radius / len * m;
                if (with_jacobian) {
                    const Vec3 mhat = m / len;
                    jac_base += model.marker_radius / len *
                                (Mat3::Identity() - mhat * mhat.transpose()) * jac_m;
                }
            }
        }
        out.landmarks.row(l) = pos.transpose();
        if (with_jacobian) out.jac[l] = std::move(jac_base);
    }
    return out;
}

std::vector<int> observed_indices(const FitProblem& problem) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < problem.observed.size(); ++i)
        if (problem.observed[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

void validate_problem(const FitProblem& problem, const FitConfig& config) {
    if (problem.model == nullptr) throw std::invalid_argument("fit: missing model");
    if (!config.direct_theta && problem.ae == nullptr)
        throw std::invalid_argument("fit: missing autoencoder (or enable direct_theta)");
    if (static_cast<int>(problem.observed.size()) != problem.model->landmark_count() ||
        problem.targets.rows() != problem.model->landmark_count())
        throw std::invalid_argument("fit: targets/mask size mismatch");
    const auto obs = observed_indices(problem);
    if (obs.size() < 4) throw std::invalid_argument("fit: need at least 4 observed landmarks");
    for (int i : obs)
        if (!problem.targets.row(i).allFinite())
            throw std::invalid_argument("fit: non-finite target");
}

int pose_dim(const FitProblem& problem, const FitConfig& config) {
    return config.direct_theta ? 3 * problem.model->joint_count() : problem.ae->latent_dim();
}

}  // namespace

StateLayout state_layout(const FitProblem& problem, const FitConfig& config) {
    StateLayout ly;
    ly.beta_size = problem.model->shape_dim();
    ly.pose_offset = ly.beta_size;
    ly.pose_size = pose_dim(problem, config);
    ly.omega_offset = ly.pose_offset + ly.pose_size;
    ly.t_offset = ly.omega_offset + 3;
    ly.log_sigma_offset = ly.t_offset + 3;
    ly.log_sigma_size = static_cast<int>(observed_indices(problem).size());
    ly.total = ly.log_sigma_offset + ly.log_sigma_size;
    if (config.mode == FitMode::barron) {
        ly.barron_offset = ly.total;
        ly.total += 2;
    }
    return ly;
}

Vec pack_state(const FitProblem& problem, const FitConfig& config, const FitState& st) {
    const StateLayout ly = state_layout(problem, config);
    Vec x(ly.total);
    x.segment(0, ly.beta_size) = st.beta;
    x.segment(ly.pose_offset, ly.pose_size) = st.pose;
    x.segment<3>(ly.omega_offset) = st.root_omega;
    x.segment<3>(ly.t_offset) = st.root_t;
    x.segment(ly.log_sigma_offset, ly.log_sigma_size) = st.log_sigma;
    if (ly.barron_offset >= 0) {
        x[ly.barron_offset] = st.barron_alpha;
        x[ly.barron_offset + 1] = st.barron_log_scale;
    }
    return x;
}

FitState unpack_state(const FitProblem& problem, const FitConfig& config, const Vec& x) {
    const StateLayout ly = state_layout(problem, config);
    if (x.size() != ly.total) throw std::invalid_argument("unpack_state: size mismatch");
    FitState st;
    st.beta = x.segment(0, ly.beta_size);
    st.pose = x.segment(ly.pose_offset, ly.pose_size);
    st.root_omega = x.segment<3>(ly.omega_offset);
    st.root_t = x.segment<3>(ly.t_offset);
    st.log_sigma = x.segment(ly.log_sigma_offset, ly.log_sigma_size);
    if (ly.barron_offset >= 0) {
        st.barron_alpha = x[ly.barron_offset];
        st.barron_log_scale = x[ly.barron_offset + 1];
    }
    return st;
}

double barron_rho(double x, double alpha, double c) {
    const double s = (x / c) * (x / c);
    if (std::abs(alpha - 2.0) < 1e-5) return 0.5 * s;
    if (std::abs(alpha) < 1e-5) return std::log1p(0.5 * s);
    const double b = std::abs(alpha - 2.0);
    return (b / alpha) * (std::pow(s / b + 1.0, 0.5 * alpha) - 1.0);
}

double barron_drho_dx(double x, double alpha, double c) {
    if (std::abs(alpha - 2.0) < 1e-5) return x / (c * c);
    if (std::abs(alpha) < 1e-5) return 2.0 * x / (x * x + 2.0 * c * c);
    const double b = std::abs(alpha - 2.0);
    const double q = (x / c) * (x / c) / b + 1.0;
    return x / (c * c) * std::pow(q, 0.5 * alpha - 1.0);
}

namespace {

// Energy and (optionally) its gradient over the packed state.
double evaluate(const FitProblem& problem, const FitConfig& config, const FitState& st,
                double data_weight, Vec* grad, Vec* residuals_out = nullptr) {
    const BodyModel& model = *problem.model;
    const StateLayout ly = state_layout(problem, config);
    const bool with_grad = grad != nullptr;

    const Vec theta = config.direct_theta ? st.pose : problem.ae->decode(st.pose);
    const ForwardEval fwd =
        forward(model, st.beta, theta, st.root_omega, st.root_t, with_grad);

    const auto obs = observed_indices(problem);
    if (residuals_out) *residuals_out = Vec::Constant(model.landmark_count(), -1.0);

    double data = 0.0;
    Vec g_theta;  // gradient w.r.t. full theta, mapped to pose later
    if (with_grad) {
        grad->setZero(ly.total);
        g_theta = Vec::Zero(theta.size());
    }

    const double scale = std::exp(st.barron_log_scale);
    const int power = config.squared_residual ? 2 : 1;

    for (std::size_t oi = 0; oi < obs.size(); ++oi) {
        const int l = obs[oi];
        const Vec3 r = problem.targets.row(l).transpose() - fwd.landmarks.row(l).transpose();
        const double rn = r.norm();
        if (residuals_out) (*residuals_out)[l] = rn;

        double d_drn = 0.0;  // d(term)/d(rn)
        if (config.mode == FitMode::barron) {
            data += barron_rho(rn, st.barron_alpha, scale);
            if (with_grad) {
                d_drn = barron_drho_dx(rn, st.barron_alpha, scale);
                // Shape derivative via a centered difference of the scalar
                // penalty; scale analytically (d rho / d log c = -x d rho / dx).
                const double h = 1e-6;
                (*grad)[ly.barron_offset] +=
                    data_weight *
                    (barron_rho(rn, st.barron_alpha + h, scale) -
                     barron_rho(rn, st.barron_alpha - h, scale)) /
                    (2.0 * h);
                (*grad)[ly.barron_offset + 1] += data_weight * (-rn * d_drn);
            }
        } else {
            const double sigma = std::exp(st.log_sigma[oi]);
            const double rp = power == 1 ? rn : rn * rn;
            data += rp / (2.0 * sigma * sigma) + st.log_sigma[oi];
            if (with_grad) {
                d_drn = (power == 1 ? 1.0 : 2.0 * rn) / (2.0 * sigma * sigma);
                (*grad)[ly.log_sigma_offset + static_cast<int>(oi)] =
                    data_weight * (1.0 - rp / (sigma * sigma));
            }
        }

        if (with_grad && rn > kTinyNorm) {
            // d rn / d params = -(r / rn)^T J_l
            const Eigen::RowVector3d coeff = -(data_weight * d_drn / rn) * r.transpose();
            const Mat& jl = fwd.jac[l];
            grad->segment(0, ly.beta_size) += (coeff * jl.leftCols(ly.beta_size)).transpose();
            g_theta += (coeff * jl.middleCols(ly.beta_size, theta.size())).transpose();
            grad->segment<3>(ly.omega_offset) +=
                (coeff * jl.middleCols(ly.beta_size + theta.size(), 3)).transpose();
            grad->segment<3>(ly.t_offset) +=
                (coeff * jl.rightCols(3)).transpose();
        }
    }

    double energy = data_weight * data;

    // Priors: lambda_beta |beta| + lambda_z |z| (latent mode only).
    const double beta_norm = st.beta.norm();
    energy += config.lambda_beta * beta_norm;
    if (!config.direct_theta) energy += config.lambda_z * st.pose.norm();

    if (with_grad) {
        if (config.direct_theta) {
            grad->segment(ly.pose_offset, ly.pose_size) += g_theta;
        } else {
            const Mat dec_jac = problem.ae->decode_jacobian(st.pose);
            grad->segment(ly.pose_offset, ly.pose_size) += dec_jac.transpose() * g_theta;
            const double pose_norm = st.pose.norm();
            if (pose_norm > kTinyNorm)
                grad->segment(ly.pose_offset, ly.pose_size) +=
                    config.lambda_z / pose_norm * st.pose;
        }
        if (beta_norm > kTinyNorm)
            grad->segment(0, ly.beta_size) += config.lambda_beta / beta_norm * st.beta;
    }
    return energy;
}

FitState default_initial_state(const FitProblem& problem, const FitConfig& config) {
    const BodyModel& model = *problem.model;
    FitState st;
    st.beta = Vec::Zero(model.shape_dim());
    const Vec theta0 = Vec::Zero(3 * model.joint_count());
    st.pose = config.direct_theta ? theta0 : problem.ae->encode(theta0);

    if (config.initial) {
        st.beta = config.initial->beta;
        st.pose = config.direct_theta ? config.initial->theta
                                      : problem.ae->encode(config.initial->theta);
        st.root_omega = axis_angle_from_rotation(config.initial->root.rotation);
        st.root_t = config.initial->root.translation;
    } else {
        // Root from a rigid alignment of three well-spread observed
        // landmarks on the canonical rest layout. Several candidate
        // triples are tried and scored by the median alignment error over
        // all observations, so one corrupted anchor cannot poison the
        // initialization.
        const LandmarkSet rest = landmarks_of(model, BodyParams::rest(model.shape_dim(),
                                                                      model.joint_count()));
        const std::vector<int> obs = observed_indices(problem);
        std::vector<int> candidates;
        for (int i : obs)
            if (model.landmark_kinds[i] == LandmarkKind::marker) candidates.push_back(i);
        if (candidates.size() < 3) candidates = obs;

        // Greedy farthest-point choice of up to 8 spread anchors.
        std::vector<int> anchors;
        anchors.push_back(candidates[0]);
        while (anchors.size() < std::min<std::size_t>(8, candidates.size())) {
            int farthest = -1;
            double best = -1;
            for (int c : candidates) {
                double nearest = 1e300;
                for (int a : anchors)
                    nearest = std::min(
                        nearest, (rest.positions.row(c) - rest.positions.row(a)).norm());
                if (nearest > best) {
                    best = nearest;
                    farthest = c;
                }
            }
            if (farthest < 0 || best < 1e-9) break;
            anchors.push_back(farthest);
        }

        Vec3 centroid_rest = Vec3::Zero(), centroid_target = Vec3::Zero();
        for (int i : obs) {
            centroid_rest += rest.positions.row(i).transpose();
            centroid_target += problem.targets.row(i).transpose();
        }
        centroid_rest /= static_cast<double>(obs.size());
        centroid_target /= static_cast<double>(obs.size());

        double best_score = 1e300;
        bool found = false;
        for (std::size_t a = 0; a + 2 < anchors.size() + 1 && anchors.size() >= 3; ++a) {
            const int i0 = anchors[a % anchors.size()];
            const int i1 = anchors[(a + 1) % anchors.size()];
            const int i2 = anchors[(a + 2) % anchors.size()];
            Points src(3, 3), dst(3, 3);
            src.row(0) = rest.positions.row(i0);
            src.row(1) = rest.positions.row(i1);
            src.row(2) = rest.positions.row(i2);
            dst.row(0) = problem.targets.row(i0);
            dst.row(1) = problem.targets.row(i1);
            dst.row(2) = problem.targets.row(i2);
            RigidTransform align;
            try {
                align = kabsch(src, dst);
            } catch (const std::invalid_argument&) {
                continue;
            }
            std::vector<double> errors;
            errors.reserve(obs.size());
            for (int i : obs) {
                const Vec3 rest_pos = rest.positions.row(i).transpose();
                errors.push_back(
                    (Vec3(problem.targets.row(i).transpose()) - align.apply(rest_pos)).norm());
            }
            std::nth_element(errors.begin(), errors.begin() + errors.size() / 2,
                             errors.end());
            const double median = errors[errors.size() / 2];
            if (median < best_score) {
                best_score = median;
                st.root_omega = axis_angle_from_rotation(align.rotation);
                st.root_t = align.translation;
                found = true;
            }
        }
        if (!found) st.root_t = centroid_target - centroid_rest;
    }

    const double sigma0 = config.mode == FitMode::plain ? 1.0 : config.sigma_init;
    st.log_sigma = Vec::Constant(static_cast<int>(observed_indices(problem).size()),
                                 std::log(sigma0));
    st.barron_alpha = config.barron_alpha_init;
    st.barron_log_scale = std::log(config.barron_scale_init);
    return st;
}

std::function<void(Vec&)> make_projection(const FitProblem& problem, const FitConfig& config) {
    const StateLayout ly = state_layout(problem, config);
    const double lo = std::log(config.sigma_min);
    const double hi = std::log(config.sigma_max);
    const double amin = config.barron_alpha_min;
    const double amax = config.barron_alpha_max;
    return [ly, lo, hi, amin, amax](Vec& x) {
        for (int i = 0; i < ly.log_sigma_size; ++i) {
            double& v = x[ly.log_sigma_offset + i];
            v = std::clamp(v, lo, hi);
        }
        if (ly.barron_offset >= 0) {
            x[ly.barron_offset] = std::clamp(x[ly.barron_offset], amin, amax);
            x[ly.barron_offset + 1] =
                std::clamp(x[ly.barron_offset + 1], std::log(1e-4), std::log(10.0));
        }
    };
}

}  // namespace

double fit_energy(const FitProblem& problem, const FitConfig& config, const FitState& state,
                  double data_weight) {
    return evaluate(problem, config, state, data_weight, nullptr);
}

Vec fit_gradient(const FitProblem& problem, const FitConfig& config, const FitState& state,
                 double data_weight) {
    Vec grad;
    evaluate(problem, config, state, data_weight, &grad);
    return grad;
}

MinimizeOutcome minimize_state(const FitProblem& problem, const FitConfig& config, FitState start,
                               const std::vector<int>& free_indices, double data_weight,
                               int max_iterations) {
    Vec full = pack_state(problem, config, start);
    const auto project_full = make_projection(problem, config);

    auto objective = [&](const Vec& reduced, Vec* grad_reduced) -> double {
        Vec x = full;
        for (std::size_t i = 0; i < free_indices.size(); ++i) x[free_indices[i]] = reduced[i];
        const FitState st = unpack_state(problem, config, x);
        if (grad_reduced == nullptr) return evaluate(problem, config, st, data_weight, nullptr);
        Vec g;
        const double f = evaluate(problem, config, st, data_weight, &g);
        grad_reduced->resize(free_indices.size());
        for (std::size_t i = 0; i < free_indices.size(); ++i)
            (*grad_reduced)[i] = g[free_indices[i]];
        return f;
    };
    auto project = [&](Vec& reduced) {
        Vec x = full;
        for (std::size_t i = 0; i < free_indices.size(); ++i) x[free_indices[i]] = reduced[i];
        project_full(x);
        for (std::size_t i = 0; i < free_indices.size(); ++i) reduced[i] = x[free_indices[i]];
    };

    detail::LbfgsOptions opt;
    opt.max_iterations = max_iterations;
    opt.grad_tol = config.grad_tol;
    opt.step_tol = config.step_tol;

    Vec reduced(free_indices.size());
    for (std::size_t i = 0; i < free_indices.size(); ++i) reduced[i] = full[free_indices[i]];
    const detail::LbfgsOutcome res = detail::lbfgs_minimize(objective, reduced, opt, project);
    if (!std::isfinite(res.f)) throw std::runtime_error("fit: non-finite energy");

    for (std::size_t i = 0; i < free_indices.size(); ++i) full[free_indices[i]] = res.x[i];
    MinimizeOutcome out;
    out.state = unpack_state(problem, config, full);
    out.energy = res.f;
    out.iterations = res.iterations;
    out.converged = res.converged;
    return out;
}

namespace {

// ---- Levenberg-Marquardt stage driver ------------------------------------
//
// The data term is a sum of per-landmark penalties of the residual norm,
// so each stage is solved by iteratively reweighted least squares with
// Marquardt damping: the surrogate gradient equals the true gradient at
// the linearization point and candidate steps are accepted only when the
// true (printed) energy decreases. Per-landmark scales (and the Barron
// shape/scale) are interleaved as exact or descent block updates.

struct StageOutcome {
    FitState state;
    int iterations = 0;
    bool converged = false;
};

// Exact per-landmark scale update: the stationary point of
// rn^p/(2 s^2) + log s, clamped to the configured bounds.
void update_sigma(const FitProblem& problem, const FitConfig& config, FitState& st,
                  const Vec& residuals) {
    const auto obs = observed_indices(problem);
    const double p = config.squared_residual ? 2.0 : 1.0;
    for (std::size_t oi = 0; oi < obs.size(); ++oi) {
        const double rn = std::max(residuals[obs[oi]], 1e-10);
        const double sigma_star =
            std::clamp(std::pow(rn, p / 2.0), config.sigma_min, config.sigma_max);
        st.log_sigma[static_cast<int>(oi)] = std::log(sigma_star);
    }
}

// Projected gradient refinement of the Barron shape and log scale with
// the residual norms held fixed (the penalty alone, no forward passes).
void update_barron(const FitConfig& config, FitState& st, const Vec& residuals,
                   const std::vector<int>& obs) {
    auto penalty = [&](double alpha, double log_scale) {
        const double c = std::exp(log_scale);
        double sum = 0;
        for (int l : obs) sum += barron_rho(residuals[l], alpha, c);
        return sum;
    };
    double alpha = st.barron_alpha;
    double log_scale = st.barron_log_scale;
    double value = penalty(alpha, log_scale);
    for (int it = 0; it < 20; ++it) {
        const double h = 1e-5;
        const double ga =
            (penalty(alpha + h, log_scale) - penalty(alpha - h, log_scale)) / (2 * h);
        const double gs =
            (penalty(alpha, log_scale + h) - penalty(alpha, log_scale - h)) / (2 * h);
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-10) {
            const double a2 = std::clamp(alpha - step * ga, config.barron_alpha_min,
                                         config.barron_alpha_max);
            const double s2 =
                std::clamp(log_scale - step * gs, std::log(1e-4), std::log(10.0));
            const double v2 = penalty(a2, s2);
            if (v2 < value) {
                alpha = a2;
                log_scale = s2;
                value = v2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    st.barron_alpha = alpha;
    st.barron_log_scale = log_scale;
}

StageOutcome lm_stage(const FitProblem& problem, const FitConfig& config, FitState st,
                      bool stage_one, double data_weight, int max_iters) {
    const BodyModel& model = *problem.model;
    const auto obs = observed_indices(problem);
    const int n_beta = stage_one ? static_cast<int>(st.beta.size()) : 0;
    const int n_pose = static_cast<int>(st.pose.size());
    const int n_root = stage_one ? 6 : 0;
    const int n_free = n_beta + n_pose + n_root;
    const int pose_col = n_beta;
    const int root_col = n_beta + n_pose;

    StageOutcome out;
    double mu = 1e-4;
    double energy = evaluate(problem, config, st, data_weight, nullptr);

    for (int it = 0; it < max_iters; ++it) {
        const Vec theta = config.direct_theta ? st.pose : problem.ae->decode(st.pose);
        const ForwardEval fwd = forward(model, st.beta, theta, st.root_omega, st.root_t, true);
        const Mat dec_jac =
            config.direct_theta ? Mat() : problem.ae->decode_jacobian(st.pose);

        Vec residuals = Vec::Constant(model.landmark_count(), -1.0);
        for (int l : obs)
            residuals[l] =
                (problem.targets.row(l) - fwd.landmarks.row(l)).norm();

        // Interleaved exact/descent updates of the non-LM blocks.
        if (!stage_one && config.mode == FitMode::noise_aware)
            update_sigma(problem, config, st, residuals);
        if (!stage_one && config.mode == FitMode::barron)
            update_barron(config, st, residuals, obs);
        energy = evaluate(problem, config, st, data_weight, nullptr);

        // IRLS weight phi(rn) with 2 phi rn = d penalty / d rn, so the
        // surrogate gradient matches the true one at the current point.
        Mat hessian = Mat::Zero(n_free, n_free);
        Vec grad = Vec::Zero(n_free);
        const double scale = std::exp(st.barron_log_scale);
        for (std::size_t oi = 0; oi < obs.size(); ++oi) {
            const int l = obs[oi];
            const Vec3 r =
                problem.targets.row(l).transpose() - fwd.landmarks.row(l).transpose();
            const double rn = std::max(residuals[l], 1e-9);
            double phi;
            if (config.mode == FitMode::barron) {
                phi = barron_drho_dx(rn, st.barron_alpha, scale) / (2.0 * rn);
            } else {
                const double sigma = std::exp(st.log_sigma[static_cast<int>(oi)]);
                phi = config.squared_residual ? 1.0 / (2.0 * sigma * sigma)
                                              : 1.0 / (4.0 * sigma * sigma * rn);
            }
            phi *= data_weight;

            Mat jac(3, n_free);  // columns [beta | pose | root]
            if (n_beta > 0) jac.leftCols(n_beta) = fwd.jac[l].leftCols(n_beta);
            const auto j_theta = fwd.jac[l].middleCols(model.shape_dim(), theta.size());
            jac.middleCols(pose_col, n_pose) =
                config.direct_theta ? Mat(j_theta) : Mat(j_theta * dec_jac);
            if (n_root > 0) jac.rightCols(6) = fwd.jac[l].rightCols(6);

            hessian.noalias() += 2.0 * phi * jac.transpose() * jac;
            grad.noalias() -= 2.0 * phi * jac.transpose() * r;
        }

        // Prior gradient (and a mild curvature bound on the diagonal).
        if (n_beta > 0) {
            const double bn = st.beta.norm();
            if (bn > kTinyNorm) grad.head(n_beta) += config.lambda_beta / bn * st.beta;
            hessian.diagonal().head(n_beta).array() +=
                config.lambda_beta / std::max(bn, 1e-2);
        }
        if (!config.direct_theta) {
            const double pn = st.pose.norm();
            if (pn > kTinyNorm)
                grad.segment(pose_col, n_pose) += config.lambda_z / pn * st.pose;
            hessian.diagonal().segment(pose_col, n_pose).array() +=
                config.lambda_z / std::max(pn, 1e-2);
        }

        if (grad.lpNorm<Eigen::Infinity>() < config.grad_tol) {
            out.converged = true;
            break;
        }

        // Marquardt loop: damp until the true energy decreases.
        bool accepted = false;
        Vec step;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Mat damped = hessian;
            damped.diagonal() += mu * hessian.diagonal().cwiseMax(1e-9);
            step = damped.ldlt().solve(-grad);
            FitState candidate = st;
            if (n_beta > 0) candidate.beta += step.head(n_beta);
            candidate.pose += step.segment(pose_col, n_pose);
            if (n_root > 0) {
                candidate.root_omega += step.segment<3>(root_col);
                candidate.root_t += step.segment<3>(root_col + 3);
            }
            const double candidate_energy =
                evaluate(problem, config, candidate, data_weight, nullptr);
            if (std::isfinite(candidate_energy) && candidate_energy < energy) {
                st = std::move(candidate);
                energy = candidate_energy;
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        ++out.iterations;
        if (!accepted) {
            // No measurable descent left.
            out.converged = true;
            break;
        }
        if (step.lpNorm<Eigen::Infinity>() < config.step_tol) {
            out.converged = true;
            break;
        }
    }
    out.state = std::move(st);
    return out;
}

FitResult run_fit(const FitProblem& problem, const FitConfig& config) {
    validate_problem(problem, config);
    FitState st = default_initial_state(problem, config);

    FitResult result;
    result.stage_iterations.assign(2, 0);
    bool converged = true;

    // Stage 1: shape, pose and root with per-landmark scales frozen.
    for (const AnnealRound& round : config.schedule) {
        const StageOutcome out =
            lm_stage(problem, config, st, true, round.data_weight, round.iterations);
        st = out.state;
        result.stage_iterations[0] += out.iterations;
        converged = out.converged;
    }

    if (config.mode != FitMode::plain) {
        // Stage 2: pose plus the noise model; shape and root stay fixed.
        // Scales are seeded at their stationary point for the stage-1
        // residuals and re-solved exactly between pose steps.
        Vec residuals;
        evaluate(problem, config, st, 1.0, nullptr, &residuals);
        if (config.mode == FitMode::noise_aware)
            update_sigma(problem, config, st, residuals);
        for (const AnnealRound& round : config.schedule) {
            const StageOutcome out =
                lm_stage(problem, config, st, false, round.data_weight, round.iterations);
            st = out.state;
            result.stage_iterations[1] += out.iterations;
            converged = out.converged;
        }
        // Leave the scales at their stationary point for the final pose.
        if (config.mode == FitMode::noise_aware) {
            evaluate(problem, config, st, 1.0, nullptr, &residuals);
            update_sigma(problem, config, st, residuals);
        }
    }

    Vec residuals;
    result.energy = evaluate(problem, config, st, 1.0, nullptr, &residuals);
    if (!std::isfinite(result.energy)) throw std::runtime_error("fit: non-finite energy");

    result.params.beta = st.beta;
    result.params.theta = config.direct_theta ? st.pose : problem.ae->decode(st.pose);
    result.params.root.rotation = rodrigues(st.root_omega);
    result.params.root.translation = st.root_t;
    if (!config.direct_theta) result.z = st.pose;
    result.converged = converged;
    result.residuals = residuals;

    const auto obs = observed_indices(problem);
    const double sigma_fill = config.mode == FitMode::plain ? 1.0 : config.sigma_init;
    result.sigma = Vec::Constant(problem.model->landmark_count(), sigma_fill);
    if (config.mode != FitMode::barron)
        for (std::size_t oi = 0; oi < obs.size(); ++oi)
            result.sigma[obs[oi]] = std::exp(st.log_sigma[static_cast<int>(oi)]);
    else
        result.sigma.setConstant(std::exp(st.barron_log_scale));
    return result;
}

}  // namespace

FitResult fit(const FitProblem& problem, const FitConfig& config) {
    return run_fit(problem, config);
}

FitResult plain_fit(const FitProblem& problem, FitConfig config) {
    config.mode = FitMode::plain;
    config.sigma_init = 1.0;
    return run_fit(problem, config);
}

FitResult barron_fit(const FitProblem& problem, FitConfig config, double alpha_min,
                     double alpha_max, double alpha_init) {
    if (alpha_init < alpha_min || alpha_init > alpha_max)
        throw std::invalid_argument("barron_fit: alpha_init outside range");
    config.mode = FitMode::barron;
    config.barron_alpha_min = alpha_min;
    config.barron_alpha_max = alpha_max;
    config.barron_alpha_init = alpha_init;
    return run_fit(problem, config);
}

}  // namespace mocap
