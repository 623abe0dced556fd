#pragma once

#include <string>
#include <vector>

#include "mocap/autoencoder.hpp"
#include "mocap/body_model.hpp"
#include "mocap/rng.hpp"

namespace mocap {

/// Reconstruction error of one pose through the autoencoder, measured on
/// regressed joint positions: sqrt of the mean Euclidean distance between
/// the original and reconstructed joints, each joint set first divided by
/// its own bounding-box diagonal. Throws on a degenerate (zero-diagonal)
/// joint set.
double reconstruction_error(const BodyModel& model, const Autoencoder& ae, const Vec& theta,
                            const Vec& beta_fixed);

/// reconstruction_error over a dataset.
std::vector<double> reconstruction_errors(const BodyModel& model, const Autoencoder& ae,
                                          const std::vector<Vec>& poses, const Vec& beta_fixed);

enum class RelevanceVariant { exp1p, sigmoid, exp_clamped };

struct RelevanceConfig {
    RelevanceVariant variant = RelevanceVariant::exp1p;
    double sigma = 1.0;      // error scale; > 0
    double clamp_max = 3.0;  // cap of the exp_clamped variant
};

/// Sample weight from reconstruction error.
///   exp1p:       1 + exp(eps/sigma), range [2, inf)
///   sigmoid:     1 + 2(sigmoid(eps/sigma) - 0.5), range [1, 2)
///   exp_clamped: min(exp(eps/sigma), clamp_max), range [1, clamp_max]
double relevance(double epsilon, const RelevanceConfig& config);

struct AnchorSet {
    std::vector<Vec> anchors;  // latent codes, pairwise distinct
    std::vector<int> source_ids;
    double threshold = 0.0;
    bool empty_warning = false;

    void save(const std::string& path) const;
    static AnchorSet load(const std::string& path);
};

/// Tail anchors by statistical thresholding: poses whose reconstruction
/// error exceeds mean + std_factor * std (strict) are encoded into the
/// anchor set. Exact duplicate codes are dropped to keep anchors
/// distinct. The recorded source ids let callers exclude the anchors
/// from any training or evaluation split.
AnchorSet select_anchors(const std::vector<Vec>& poses, const Autoencoder& ae,
                         const BodyModel& model, double std_factor = 2.0,
                         const Vec* beta_fixed = nullptr);

struct SlerpInfo {
    bool linear_fallback = false;  // angle below tolerance or antipodal
};

/// Spherical interpolation: great-circle blend of the directions with the
/// norm interpolated linearly. Falls back to linear interpolation within
/// 1e-7 of parallel or antipodal directions. Throws on zero vectors.
Vec slerp(const Vec& a, const Vec& b, double t, SlerpInfo* info = nullptr);

enum class BlendMode { slerp, lerp, random };

struct SamplerConfig {
    Vec jitter_std;          // per-dimension std around anchors (s)
    double max_blend = 1.0;  // B, blend factor drawn from U(0, B)
    BlendMode mode = BlendMode::slerp;
};

/// jitter_std = 0.1 * latent scale, max_blend 1, slerp.
SamplerConfig default_sampler_config(const Autoencoder& ae);

struct TailSample {
    Vec theta;
    Vec z;
    int anchor_i = -1;
    int anchor_j = -1;
    double blend = 0.0;
};

/// Deterministic core of the sampler: jittered anchors blended at a given
/// factor, decoded to a pose.
TailSample blend_anchors(const AnchorSet& anchors, int i, int j, double blend,
                         const Autoencoder& ae, const SamplerConfig& config, Rng& rng);

/// One tail sample: two distinct anchors drawn uniformly, jittered with
/// N(a, s^2), blended by the configured mode with b ~ U(0, B) and
/// decoded. Random mode ignores the anchors and draws from the latent
/// prior N(0, diag(latent scale^2)).
TailSample sample_tail(const AnchorSet& anchors, const Autoencoder& ae,
                       const SamplerConfig& config, Rng& rng);

/// Mean Euclidean distance between two equal-size sets of re-encoded
/// latent vectors (index-aligned).
double div_metric(const std::vector<Vec>& a, const std::vector<Vec>& b);

/// Frechet distance between the Gaussian fits of two feature sets:
/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)). Needs >= 2 samples per
/// set; negative eigenvalues met inside the matrix square root are
/// clipped to zero.
double fid_metric(const std::vector<Vec>& feats_a, const std::vector<Vec>& feats_b);

}  // namespace mocap
