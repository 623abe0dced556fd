#include "mocap/autoencoder.hpp"

#include <fstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json_util.hpp"
#include "mocap/io.hpp"

namespace mocap {

using detail::json;

Mat Autoencoder::decode_jacobian(const Vec& z) const {
    const double h = 1e-6;
    Mat jac(pose_dim(), latent_dim());
    Vec zp = z, zm = z;
    for (int c = 0; c < latent_dim(); ++c) {
        zp[c] += h;
        zm[c] -= h;
        jac.col(c) = (decode(zp) - decode(zm)) / (2.0 * h);
        zp[c] = z[c];
        zm[c] = z[c];
    }
    return jac;
}

PcaAutoencoder PcaAutoencoder::fit(const std::vector<Vec>& poses, int latent_dim) {
    const int n = static_cast<int>(poses.size());
    if (latent_dim <= 0) throw std::invalid_argument("pca: latent dimension must be positive");
    if (n <= latent_dim)
        throw std::invalid_argument("pca: need more samples than latent dimensions");
    const int d = static_cast<int>(poses[0].size());

    PcaAutoencoder ae;
    ae.latent_dim_ = latent_dim;
    ae.mean_ = Vec::Zero(d);
    for (const auto& p : poses) {
        if (p.size() != d) throw std::invalid_argument("pca: inconsistent pose dimension");
        ae.mean_ += p;
    }
    ae.mean_ /= n;

    Mat centered(n, d);
    for (int i = 0; i < n; ++i) centered.row(i) = (poses[i] - ae.mean_).transpose();

    Eigen::BDCSVD<Mat> svd(centered, Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    int rank = 0;
    const double tol = 1e-12 * std::max(sv.size() > 0 ? sv[0] : 0.0, 1e-300);
    for (int i = 0; i < sv.size() && i < latent_dim; ++i)
        if (sv[i] > tol) ++rank;

    ae.directions_ = svd.matrixV().leftCols(rank).transpose();
    ae.explained_variance_ = (sv.head(rank).array().square() / (n - 1)).matrix();
    return ae;
}

Vec PcaAutoencoder::encode(const Vec& theta) const {
    Vec z = Vec::Zero(latent_dim_);
    z.head(rank()) = directions_ * (theta - mean_);
    return z;
}

Vec PcaAutoencoder::decode(const Vec& z) const {
    return mean_ + directions_.transpose() * z.head(rank());
}

Mat PcaAutoencoder::decode_jacobian(const Vec&) const {
    Mat jac = Mat::Zero(pose_dim(), latent_dim_);
    jac.leftCols(rank()) = directions_.transpose();
    return jac;
}

Vec PcaAutoencoder::latent_scale() const {
    Vec s = Vec::Zero(latent_dim_);
    s.head(rank()) = explained_variance_.array().sqrt().matrix();
    return s;
}

void PcaAutoencoder::save(const std::string& path) const {
    json j;
    j["latent_dim"] = latent_dim_;
    j["mean"] = detail::to_json(mean_);
    j["directions"] = detail::to_json(directions_);
    j["explained_variance"] = detail::to_json(explained_variance_);
    write_file_atomic(path, j.dump(1));
}

PcaAutoencoder PcaAutoencoder::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    PcaAutoencoder ae;
    ae.latent_dim_ = j.at("latent_dim").get<int>();
    ae.mean_ = detail::vec_from(j.at("mean"));
    ae.directions_ = detail::mat_from(j.at("directions"));
    ae.explained_variance_ = detail::vec_from(j.at("explained_variance"));
    if (ae.directions_.rows() > ae.latent_dim_)
        throw std::invalid_argument("pca file: more directions than latent dimensions");
    return ae;
}

SaturatingAutoencoder::SaturatingAutoencoder(std::shared_ptr<const Autoencoder> inner, Vec kappa)
    : inner_(std::move(inner)), kappa_(std::move(kappa)) {
    if (kappa_.size() != inner_->latent_dim())
        throw std::invalid_argument("saturating autoencoder: kappa dimension mismatch");
    if (kappa_.minCoeff() <= 0)
        throw std::invalid_argument("saturating autoencoder: kappa must be positive");
}

Vec SaturatingAutoencoder::squash(const Vec& z) const {
    Vec out(z.size());
    for (int i = 0; i < z.size(); ++i) out[i] = kappa_[i] * std::tanh(z[i] / kappa_[i]);
    return out;
}

Mat SaturatingAutoencoder::decode_jacobian(const Vec& z) const {
    const Vec squashed = squash(z);
    Mat jac = inner_->decode_jacobian(squashed);
    for (int i = 0; i < z.size(); ++i) {
        const double t = std::tanh(z[i] / kappa_[i]);
        jac.col(i) *= (1.0 - t * t);
    }
    return jac;
}

}  // namespace mocap
