#include "mocap/balance.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "json_util.hpp"
#include "mocap/io.hpp"

namespace mocap {

using detail::json;

namespace {

Points joint_positions(const BodyModel& model, const Vec& theta, const Vec& beta) {
    BodyParams params;
    params.beta = beta;
    params.theta = theta;
    const LandmarkSet lm = landmarks_of(model, params);
    const std::vector<int> idx = lm.indices_of(LandmarkKind::joint);
    Points joints(idx.size(), 3);
    for (std::size_t i = 0; i < idx.size(); ++i) joints.row(i) = lm.positions.row(idx[i]);
    return joints;
}

Points bbox_normalize(const Points& pts) {
    const Vec3 lo = pts.colwise().minCoeff().transpose();
    const Vec3 hi = pts.colwise().maxCoeff().transpose();
    const double diag = (hi - lo).norm();
    if (diag < 1e-12)
        throw std::invalid_argument("reconstruction_error: degenerate joint bounding box");
    return pts / diag;
}

}  // namespace

double reconstruction_error(const BodyModel& model, const Autoencoder& ae, const Vec& theta,
                            const Vec& beta_fixed) {
    if (!theta.allFinite()) throw std::invalid_argument("reconstruction_error: non-finite pose");
    const Vec theta_rec = ae.decode(ae.encode(theta));
    const Points joints = bbox_normalize(joint_positions(model, theta, beta_fixed));
    const Points joints_rec = bbox_normalize(joint_positions(model, theta_rec, beta_fixed));
    const double mean_dist = (joints - joints_rec).rowwise().norm().mean();
    return std::sqrt(mean_dist);
}

std::vector<double> reconstruction_errors(const BodyModel& model, const Autoencoder& ae,
                                          const std::vector<Vec>& poses, const Vec& beta_fixed) {
    std::vector<double> out;
    out.reserve(poses.size());
    for (const auto& theta : poses)
        out.push_back(reconstruction_error(model, ae, theta, beta_fixed));
    return out;
}

double relevance(double epsilon, const RelevanceConfig& config) {
    if (epsilon < 0) throw std::invalid_argument("relevance: negative error");
    if (config.sigma <= 0) throw std::invalid_argument("relevance: sigma must be positive");
    const double x = epsilon / config.sigma;
    switch (config.variant) {
        case RelevanceVariant::exp1p:
            return 1.0 + std::exp(x);
        case RelevanceVariant::sigmoid:
            return 1.0 + 2.0 * (1.0 / (1.0 + std::exp(-x)) - 0.5);
        case RelevanceVariant::exp_clamped:
            if (x >= std::log(config.clamp_max)) return config.clamp_max;
            return std::exp(x);
    }
    throw std::logic_error("relevance: unknown variant");
}

void AnchorSet::save(const std::string& path) const {
    json j;
    j["threshold"] = threshold;
    j["source_ids"] = source_ids;
    json a = json::array();
    for (const auto& z : anchors) a.push_back(detail::to_json(z));
    j["anchors"] = std::move(a);
    write_file_atomic(path, j.dump(1));
}

AnchorSet AnchorSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    AnchorSet set;
    set.threshold = j.at("threshold").get<double>();
    for (const auto& id : j.at("source_ids")) set.source_ids.push_back(id.get<int>());
    for (const auto& a : j.at("anchors")) set.anchors.push_back(detail::vec_from(a));
    return set;
}

AnchorSet select_anchors(const std::vector<Vec>& poses, const Autoencoder& ae,
                         const BodyModel& model, double std_factor, const Vec* beta_fixed) {
    if (poses.empty()) throw std::invalid_argument("select_anchors: empty dataset");
    const Vec beta = beta_fixed ? *beta_fixed : Vec::Zero(model.shape_dim());
    const std::vector<double> eps = reconstruction_errors(model, ae, poses, beta);

    const int n = static_cast<int>(eps.size());
    double mean = 0;
    for (double e : eps) mean += e;
    mean /= n;
    double var = 0;
    for (double e : eps) var += (e - mean) * (e - mean);
    const double stddev = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;

    AnchorSet set;
    set.threshold = std_factor == -std::numeric_limits<double>::infinity()
                        ? -std::numeric_limits<double>::infinity()
                        : mean + std_factor * stddev;
    for (int i = 0; i < n; ++i) {
        if (!(eps[i] > set.threshold)) continue;
        Vec z = ae.encode(poses[i]);
        bool duplicate = false;
        for (const auto& existing : set.anchors) {
            if ((existing - z).norm() < 1e-12) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        set.anchors.push_back(std::move(z));
        set.source_ids.push_back(i);
    }
    set.empty_warning = set.anchors.empty();
    return set;
}

Vec slerp(const Vec& a, const Vec& b, double t, SlerpInfo* info) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) throw std::invalid_argument("slerp: zero vector");
    const Vec ua = a / na;
    const Vec ub = b / nb;
    const double dot = std::clamp(ua.dot(ub), -1.0, 1.0);
    const double omega = std::acos(dot);
    if (omega < 1e-7 || M_PI - omega < 1e-7) {
        if (info) info->linear_fallback = true;
        return (1.0 - t) * a + t * b;
    }
    const double norm = (1.0 - t) * na + t * nb;
    const Vec dir = (std::sin((1.0 - t) * omega) * ua + std::sin(t * omega) * ub) / std::sin(omega);
    return norm * dir;
}

SamplerConfig default_sampler_config(const Autoencoder& ae) {
    SamplerConfig config;
    config.jitter_std = 0.1 * ae.latent_scale();
    return config;
}

namespace {

Vec blend_latents(const Vec& zi, const Vec& zj, double b, BlendMode mode) {
    if (mode == BlendMode::lerp) return (1.0 - b) * zi + b * zj;
    if (zi.norm() < 1e-12 || zj.norm() < 1e-12) return (1.0 - b) * zi + b * zj;
    return slerp(zi, zj, b);
}

}  // namespace

TailSample blend_anchors(const AnchorSet& anchors, int i, int j, double blend,
                         const Autoencoder& ae, const SamplerConfig& config, Rng& rng) {
    TailSample sample;
    sample.anchor_i = i;
    sample.anchor_j = j;
    sample.blend = blend;
    const Vec zi = anchors.anchors[i] + config.jitter_std.cwiseProduct(rng.normal_vec(ae.latent_dim()));
    const Vec zj = anchors.anchors[j] + config.jitter_std.cwiseProduct(rng.normal_vec(ae.latent_dim()));
    sample.z = blend_latents(zi, zj, blend, config.mode);
    sample.theta = ae.decode(sample.z);
    return sample;
}

TailSample sample_tail(const AnchorSet& anchors, const Autoencoder& ae,
                       const SamplerConfig& config, Rng& rng) {
    if (config.max_blend < 0.0 || config.max_blend > 1.0)
        throw std::invalid_argument("sample_tail: max blend outside [0,1]");
    if (config.jitter_std.size() != ae.latent_dim())
        throw std::invalid_argument("sample_tail: jitter std dimension mismatch");
    if (config.jitter_std.minCoeff() < 0)
        throw std::invalid_argument("sample_tail: negative jitter std");

    if (config.mode == BlendMode::random) {
        TailSample sample;
        sample.z = ae.latent_scale().cwiseProduct(rng.normal_vec(ae.latent_dim()));
        sample.theta = ae.decode(sample.z);
        return sample;
    }

    const int n = static_cast<int>(anchors.anchors.size());
    if (n < 2) throw std::invalid_argument("sample_tail: need at least 2 anchors for blending");
    const int i = static_cast<int>(rng.uniform_int(0, n - 1));
    int j = static_cast<int>(rng.uniform_int(0, n - 2));
    if (j >= i) ++j;
    const double b = rng.uniform(0.0, config.max_blend);
    return blend_anchors(anchors, i, j, b, ae, config, rng);
}

double div_metric(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || a.size() != b.size())
        throw std::invalid_argument("div_metric: subsets must be non-empty and equal size");
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
    return sum / static_cast<double>(a.size());
}

namespace {

Mat sqrt_psd(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
    Vec values = eig.eigenvalues();
    for (int i = 0; i < values.size(); ++i) values[i] = values[i] > 0 ? std::sqrt(values[i]) : 0.0;
    return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

std::pair<Vec, Mat> gaussian_fit(const std::vector<Vec>& feats) {
    const int n = static_cast<int>(feats.size());
    const int d = static_cast<int>(feats[0].size());
    Vec mean = Vec::Zero(d);
    for (const auto& f : feats) mean += f;
    mean /= n;
    Mat cov = Mat::Zero(d, d);
    for (const auto& f : feats) cov += (f - mean) * (f - mean).transpose();
    cov /= (n - 1);
    return {mean, cov};
}

}  // namespace

double fid_metric(const std::vector<Vec>& feats_a, const std::vector<Vec>& feats_b) {
    if (feats_a.size() < 2 || feats_b.size() < 2)
        throw std::invalid_argument("fid_metric: need at least 2 samples per set");
    const auto [mu1, s1] = gaussian_fit(feats_a);
    const auto [mu2, s2] = gaussian_fit(feats_b);
    if (mu1.size() != mu2.size()) throw std::invalid_argument("fid_metric: dimension mismatch");

    const Mat root2 = sqrt_psd(s2);
    const double cross = sqrt_psd(root2 * s1 * root2).trace();
    const double fid = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross;
    return std::max(fid, 0.0);
}

}  // namespace mocap
