#pragma once

#include <array>
#include <functional>
#include <string>

#include "mocap/body_model.hpp"
#include "mocap/rng.hpp"
#include "mocap/types.hpp"

namespace mocap {

/// Probabilities and ranges of the augmentation / corruption pipeline.
struct CorruptionConfig {
    double p_shape_aug = 0.5;
    double p_flip = 0.5;
    double p_occlude = 0.7;
    double p_ghost = 0.7;
    double p_shift = 0.8;

    std::array<int, 2> occlude_range = {1, 5};        // [m, n'] markers removed
    std::array<int, 2> ghost_count_range = {1, 3};    // ghosts appended
    std::array<int, 2> shift_count_range = {1, 10};   // N markers shifted
    double shift_max = 0.05;                          // M, meters per axis
    std::array<int, 2> shape_resample_range = {0, 2}; // |S| coefficients redrawn

    std::uint64_t seed = 0;
};

CorruptionConfig load_corruption_config(const std::string& path);
void save_corruption_config(const CorruptionConfig& config, const std::string& path);

/// Shape augmentation: beta + U(-1,1) elementwise, then a random subset of
/// [range] coefficients redrawn from N(0,1).
Vec augment_shape(const Vec& beta, Rng& rng, std::array<int, 2> resample_range = {0, 2});

/// Left/right joint pairing needed by the handedness flip.
struct FlipMetadata {
    int joint_count = 0;
    std::vector<std::pair<int, int>> pairs;
};

FlipMetadata flip_metadata(const BodyModel& model);

/// Swaps left/right chain rotations and mirrors every rotation across the
/// sagittal (x = 0) plane: axis-angle y and z components are negated.
/// An involution: applying it twice restores the input.
Vec flip_handedness(const Vec& theta, const FlipMetadata& metadata);

struct OcclusionResult {
    MarkerFrame frame;
    std::vector<int> removed_indices;  // into the input frame
    std::vector<std::string> removed_labels;
};

/// Removes k ~ U{m..n'} distinct markers.
OcclusionResult occlude(const MarkerFrame& frame, Rng& rng, int min_count, int max_count);

struct GhostResult {
    MarkerFrame frame;
    int added = 0;
    bool degenerate_covariance = false;
    Vec3 center;      // per-axis median of the input points
    Mat3 covariance;  // sample covariance actually used (after any jitter)
};

/// Appends unlabeled ghost points drawn from N(median, sample covariance).
/// A degenerate covariance gets 1e-6 * I jitter and is flagged.
GhostResult ghost(const MarkerFrame& frame, Rng& rng, std::array<int, 2> count_range);

struct ShiftResult {
    MarkerFrame frame;
    std::vector<int> shifted_indices;
};

/// Adds U(-M, M)^3 offsets to N distinct markers; labels preserved.
ShiftResult shift(const MarkerFrame& frame, Rng& rng, int count, double max_offset);

struct PipelineProvenance {
    bool fired_shape_aug = false;
    bool fired_flip = false;
    bool fired_occlude = false;
    bool fired_ghost = false;
    bool fired_shift = false;
    std::vector<int> occluded_indices;
    std::vector<std::string> occluded_labels;
    int ghost_count = 0;
    bool ghost_degenerate_covariance = false;
    std::vector<int> shifted_indices;
};

struct PipelineResult {
    BodyParams params;
    MarkerFrame frame;
    PipelineProvenance provenance;
};

/// Re-synthesizes the marker frame after parameter augmentation; wired to
/// the body model by the caller so this module stays independent of it.
using Resynthesize = std::function<MarkerFrame(const BodyParams&)>;

/// Full pipeline in the order shape-aug, flip, occlude, ghost, shift, each
/// stage gated by an independent Bernoulli draw of its probability. When
/// an augmentation stage fired and a resynthesize hook is given, the frame
/// is regenerated from the augmented parameters before corruption.
PipelineResult apply_pipeline(const BodyParams& params, const MarkerFrame& frame,
                              const CorruptionConfig& config, Rng& rng,
                              const FlipMetadata* flip_meta = nullptr,
                              const Resynthesize& resynthesize = nullptr);

}  // namespace mocap
