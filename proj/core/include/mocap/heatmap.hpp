#pragma once

#include <vector>

#include "mocap/io.hpp"
#include "mocap/types.hpp"

namespace mocap {

/// Affine map into the unit cube: n = scale * p + offset.
struct NormalizeInfo {
    double scale = 1.0;
    Vec3 offset = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * p + offset; }
    Vec3 invert(const Vec3& n) const { return (n - offset) / scale; }
};

/// Frame coordinates scaled into [0,1]^3, gravity along y. Points that
/// land outside the cube (unlabeled ghosts can) are clamped and flagged.
struct NormalizedFrame {
    Points coords;
    NormalizeInfo info;
    std::vector<int> clamped;
};

enum class BboxPolicy {
    max_extent,  // isotropic, largest bbox side spans the cube (default)
    diagonal,    // isotropic, bbox diagonal length spans the cube
};

/// Isotropic normalization centered on the bounding box of the labeled
/// markers (all points when nothing is labeled), with a margin on each
/// side. Invertible through the stored transform; throws when the bbox
/// is degenerate (single point).
NormalizedFrame normalize_frame(const MarkerFrame& frame,
                                BboxPolicy policy = BboxPolicy::max_extent,
                                double margin = 0.1);

Points denormalize(const NormalizeInfo& info, const Points& coords);

/// Per-landmark heatmaps for one orthographic view.
struct HeatmapStack {
    GridView view = GridView::xy;
    std::vector<Mat> maps;  // one resolution x resolution map per landmark
};

/// Orthographic depth rendering: every point splats to its nearest pixel
/// of the view plane, the pixel keeps the normalized depth along the
/// projection axis, nearest to camera wins, 0 means empty.
/// View xy: u = x, v = y, depth = z. View yz: u = z, v = y, depth = x.
Mat render_ortho(const NormalizedFrame& frame, GridView view, int resolution = 160);

/// Unquantized Gaussian heatmap around a continuous 2D target in [0,1]^2,
/// normalized to sum 1.
Mat encode_heatmap(const Vec2& coord, double sigma_px, int resolution = 160);

/// Per-landmark Gaussian heatmaps of a normalized frame for one view.
HeatmapStack encode_stack(const Points& coords, GridView view, double sigma_px,
                          int resolution = 160);

/// Center of mass of a non-negative map in normalized coordinates (u, v).
/// The map is normalized by its sum; throws when the sum is zero.
Vec2 soft_argmax(const Mat& map);

/// soft_argmax after an exponential softmax with the given temperature
/// (for raw score maps rather than probability maps).
Vec2 soft_argmax(const Mat& map, double temperature);

/// Two-view marginal fusion: x from the xy view, z from the yz view, y
/// averaged across the views that share it.
NormalizedFrame marginal_fuse(const HeatmapStack& hm_xy, const HeatmapStack& hm_yz,
                              const NormalizeInfo* info = nullptr);

/// Jensen-Shannon divergence between two sum-normalized heatmaps, nats,
/// in [0, ln 2].
double js_divergence(const Mat& a, const Mat& b);

/// Welsch penalty 1 - exp(-r^2 / (2 nu^2)) of a residual magnitude.
double welsch(double residual, double nu);

struct LossWeights {
    double lambda_js = 1.0;
    double lambda_welsch = 1.0;
    double nu = 0.05;
};

/// Relevance-weighted sum over landmarks of the Jensen-Shannon term (both
/// views) and the Welsch term on normalized coordinate residuals.
double total_loss(const HeatmapStack& gt_xy, const HeatmapStack& est_xy,
                  const HeatmapStack& gt_yz, const HeatmapStack& est_yz, const Points& gt_coords,
                  const Points& est_coords, double rho, const LossWeights& weights);

}  // namespace mocap
