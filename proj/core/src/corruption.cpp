#include "mocap/corruption.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "json_util.hpp"
#include "mocap/io.hpp"

namespace mocap {

using detail::json;

CorruptionConfig load_corruption_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    CorruptionConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("p_shape_aug", c.p_shape_aug);
    get("p_flip", c.p_flip);
    get("p_occlude", c.p_occlude);
    get("p_ghost", c.p_ghost);
    get("p_shift", c.p_shift);
    get("shift_max", c.shift_max);
    get("seed", c.seed);
    auto get_range = [&](const char* key, std::array<int, 2>& field) {
        if (j.contains(key)) {
            field[0] = j.at(key)[0].get<int>();
            field[1] = j.at(key)[1].get<int>();
        }
    };
    get_range("occlude_range", c.occlude_range);
    get_range("ghost_count_range", c.ghost_count_range);
    get_range("shift_count_range", c.shift_count_range);
    get_range("shape_resample_range", c.shape_resample_range);
    for (double p : {c.p_shape_aug, c.p_flip, c.p_occlude, c.p_ghost, c.p_shift})
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("corruption config: probability out of [0,1]");
    if (c.shift_max < 0) throw std::invalid_argument("corruption config: shift_max must be >= 0");
    return c;
}

void save_corruption_config(const CorruptionConfig& c, const std::string& path) {
    json j;
    j["p_shape_aug"] = c.p_shape_aug;
    j["p_flip"] = c.p_flip;
    j["p_occlude"] = c.p_occlude;
    j["p_ghost"] = c.p_ghost;
    j["p_shift"] = c.p_shift;
    j["occlude_range"] = c.occlude_range;
    j["ghost_count_range"] = c.ghost_count_range;
    j["shift_count_range"] = c.shift_count_range;
    j["shift_max"] = c.shift_max;
    j["shape_resample_range"] = c.shape_resample_range;
    j["seed"] = c.seed;
    write_file_atomic(path, j.dump(2));
}

Vec augment_shape(const Vec& beta, Rng& rng, std::array<int, 2> resample_range) {
    Vec out = beta;
    for (int i = 0; i < out.size(); ++i) out[i] += rng.uniform(-1.0, 1.0);
    const int max_resample = std::min<int>(resample_range[1], static_cast<int>(out.size()));
    const int min_resample = std::min<int>(resample_range[0], max_resample);
    const int count = static_cast<int>(rng.uniform_int(min_resample, max_resample));
    for (int idx : rng.sample_indices(static_cast<int>(out.size()), count))
        out[idx] = rng.normal();
    return out;
}

FlipMetadata flip_metadata(const BodyModel& model) {
    FlipMetadata meta;
    meta.joint_count = model.joint_count();
    meta.pairs = model.left_right_joint_pairs();
    return meta;
}

Vec flip_handedness(const Vec& theta, const FlipMetadata& meta) {
    if (meta.pairs.empty() || meta.joint_count == 0)
        throw std::invalid_argument("flip_handedness: missing left/right pair metadata");
    if (theta.size() != 3 * meta.joint_count)
        throw std::invalid_argument("flip_handedness: theta size mismatch");
    Vec out = theta;
    for (const auto& [l, r] : meta.pairs) {
        out.segment<3>(3 * l) = theta.segment<3>(3 * r);
        out.segment<3>(3 * r) = theta.segment<3>(3 * l);
    }
    // Mirror every rotation across x = 0: keep x, negate y and z.
    for (int j = 0; j < meta.joint_count; ++j) {
        out[3 * j + 1] = -out[3 * j + 1];
        out[3 * j + 2] = -out[3 * j + 2];
    }
    return out;
}

OcclusionResult occlude(const MarkerFrame& frame, Rng& rng, int min_count, int max_count) {
    const int n = static_cast<int>(frame.size());
    if (min_count < 0 || min_count > max_count || max_count > n)
        throw std::invalid_argument("occlude: invalid count range");
    const int k = static_cast<int>(rng.uniform_int(min_count, max_count));
    std::vector<int> removed = rng.sample_indices(n, k);
    std::sort(removed.begin(), removed.end());

    OcclusionResult out;
    out.frame.frame_id = frame.frame_id;
    std::size_t next = 0;
    for (int i = 0; i < n; ++i) {
        if (next < removed.size() && removed[next] == i) {
            ++next;
            if (frame.labels[i]) out.removed_labels.push_back(*frame.labels[i]);
            continue;
        }
        out.frame.points.push_back(frame.points[i]);
        out.frame.labels.push_back(frame.labels[i]);
    }
    out.removed_indices = std::move(removed);
    return out;
}

GhostResult ghost(const MarkerFrame& frame, Rng& rng, std::array<int, 2> count_range) {
    const int n = static_cast<int>(frame.size());
    if (n < 4) throw std::invalid_argument("ghost: need at least 4 points for a covariance");
    if (count_range[0] < 0 || count_range[0] > count_range[1])
        throw std::invalid_argument("ghost: invalid count range");

    GhostResult out;
    out.frame = frame;

    // Per-axis median (average of the middle pair for even counts).
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> vals(n);
        for (int i = 0; i < n; ++i) vals[i] = frame.points[i][axis];
        std::sort(vals.begin(), vals.end());
        out.center[axis] = n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }

    Vec3 mean = Vec3::Zero();
    for (const auto& p : frame.points) mean += p;
    mean /= n;
    Mat3 cov = Mat3::Zero();
    for (const auto& p : frame.points) cov += (p - mean) * (p - mean).transpose();
    cov /= (n - 1);

    Eigen::LLT<Mat3> llt(cov);
    if (llt.info() != Eigen::Success) {
        cov += 1e-6 * Mat3::Identity();
        llt.compute(cov);
        out.degenerate_covariance = true;
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("ghost: covariance not factorizable after jitter");
    }
    out.covariance = cov;

    out.added = static_cast<int>(rng.uniform_int(count_range[0], count_range[1]));
    const Mat3 chol = llt.matrixL();
    for (int g = 0; g < out.added; ++g) {
        const Vec3 sample = out.center + chol * rng.normal3();
        out.frame.points.push_back(sample);
        out.frame.labels.push_back(std::nullopt);
    }
    return out;
}

ShiftResult shift(const MarkerFrame& frame, Rng& rng, int count, double max_offset) {
    const int n = static_cast<int>(frame.size());
    if (count < 0 || count > n) throw std::invalid_argument("shift: invalid count");
    if (max_offset < 0) throw std::invalid_argument("shift: negative max offset");

    ShiftResult out;
    out.frame = frame;
    out.shifted_indices = rng.sample_indices(n, count);
    std::sort(out.shifted_indices.begin(), out.shifted_indices.end());
    for (int idx : out.shifted_indices) {
        const Vec3 offset(rng.uniform(-max_offset, max_offset),
                          rng.uniform(-max_offset, max_offset),
                          rng.uniform(-max_offset, max_offset));
        out.frame.points[idx] += offset;
    }
    return out;
}

PipelineResult apply_pipeline(const BodyParams& params, const MarkerFrame& frame,
                              const CorruptionConfig& config, Rng& rng,
                              const FlipMetadata* flip_meta, const Resynthesize& resynthesize) {
    PipelineResult out;
    out.params = params;
    out.frame = frame;
    auto& prov = out.provenance;

    if (rng.bernoulli(config.p_shape_aug)) {
        prov.fired_shape_aug = true;
        out.params.beta = augment_shape(out.params.beta, rng, config.shape_resample_range);
    }
    if (rng.bernoulli(config.p_flip)) {
        if (flip_meta == nullptr)
            throw std::invalid_argument("apply_pipeline: flip enabled but no pair metadata");
        prov.fired_flip = true;
        out.params.theta = flip_handedness(out.params.theta, *flip_meta);
    }
    if ((prov.fired_shape_aug || prov.fired_flip) && resynthesize)
        out.frame = resynthesize(out.params);

    if (rng.bernoulli(config.p_occlude)) {
        prov.fired_occlude = true;
        const int n = static_cast<int>(out.frame.size());
        const int lo = std::min(config.occlude_range[0], n);
        const int hi = std::min(config.occlude_range[1], n);
        OcclusionResult occ = occlude(out.frame, rng, lo, hi);
        prov.occluded_indices = std::move(occ.removed_indices);
        prov.occluded_labels = std::move(occ.removed_labels);
        out.frame = std::move(occ.frame);
    }
    if (rng.bernoulli(config.p_ghost)) {
        prov.fired_ghost = true;
        if (out.frame.size() >= 4) {
            GhostResult gh = ghost(out.frame, rng, config.ghost_count_range);
            prov.ghost_count = gh.added;
            prov.ghost_degenerate_covariance = gh.degenerate_covariance;
            out.frame = std::move(gh.frame);
        }
    }
    if (rng.bernoulli(config.p_shift)) {
        prov.fired_shift = true;
        const int n = static_cast<int>(out.frame.size());
        const int lo = std::min(config.shift_count_range[0], n);
        const int hi = std::min(config.shift_count_range[1], n);
        const int count = static_cast<int>(rng.uniform_int(lo, hi));
        ShiftResult sh = shift(out.frame, rng, count, config.shift_max);
        prov.shifted_indices = std::move(sh.shifted_indices);
        out.frame = std::move(sh.frame);
    }
    return out;
}

}  // namespace mocap
