#include "mocap/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mocap {

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Mat3 rodrigues(const Vec3& w) {
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    double a, b;  // sin(t)/t and (1-cos(t))/t^2
    if (theta < 1e-8) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    const Mat3 k = skew(w);
    return Mat3::Identity() + a * k + b * (k * k);
}

std::array<Mat3, 3> rodrigues_jacobian(const Vec3& w) {
    // Gallego & Yezzi: dR/dw_a = (w_a [w]x + [w x (I - R) e_a]x) / |w|^2 * R.
    std::array<Mat3, 3> jac;
    const double theta2 = w.squaredNorm();
    if (theta2 < 1e-16) {
        for (int a = 0; a < 3; ++a) jac[a] = skew(Vec3::Unit(a));
        return jac;
    }
    const Mat3 r = rodrigues(w);
    const Mat3 wx = skew(w);
    const Mat3 imr = Mat3::Identity() - r;
    for (int a = 0; a < 3; ++a) {
        const Vec3 v = w.cross(imr.col(a));
        jac[a] = ((w[a] * wx + skew(v)) / theta2) * r;
    }
    return jac;
}

Vec3 axis_angle_from_rotation(const Mat3& r) {
    const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta < 1e-10) return Vec3::Zero();
    if (theta > M_PI - 1e-6) {
        // Near 180 degrees the off-diagonal route degenerates; recover the
        // axis from the dominant column of R + I.
        Mat3 m = r + Mat3::Identity();
        int col;
        m.colwise().norm().maxCoeff(&col);
        Vec3 axis = m.col(col).normalized();
        // Resolve the sign from the skew part where it is nonzero.
        Vec3 s(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
        if (s.dot(axis) < 0) axis = -axis;
        return theta * axis;
    }
    Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return axis * (theta / (2.0 * std::sin(theta)));
}

double rotation_geodesic(const Mat3& a, const Mat3& b) {
    const double c = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

RigidTransform kabsch(const Points& src, const Points& dst) {
    if (src.rows() != dst.rows() || src.rows() < 3)
        throw std::invalid_argument("kabsch: need >= 3 paired points");
    const Eigen::RowVector3d src_mean = src.colwise().mean();
    const Eigen::RowVector3d dst_mean = dst.colwise().mean();
    const Points sc = src.rowwise() - src_mean;
    const Points dc = dst.rowwise() - dst_mean;
    const Mat3 h = sc.transpose() * dc;
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    // Collinear inputs leave the rotation about the line unconstrained.
    if (sv[1] < 1e-12 * std::max(sv[0], 1e-300))
        throw std::invalid_argument("kabsch: degenerate (collinear) point set");
    Mat3 d = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
    RigidTransform out;
    out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    out.translation = dst_mean.transpose() - out.rotation * src_mean.transpose();
    return out;
}

bool is_rotation(const Mat3& r, double tol) {
    return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(r.determinant() - 1.0) < tol;
}

}  // namespace mocap
