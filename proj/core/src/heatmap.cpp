#include "mocap/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mocap {

NormalizedFrame normalize_frame(const MarkerFrame& frame, BboxPolicy policy, double margin) {
    if (frame.points.empty()) throw std::invalid_argument("normalize_frame: empty frame");
    if (margin < 0 || margin >= 0.5) throw std::invalid_argument("normalize_frame: bad margin");

    // Bounding box over labeled markers only, so ghosts cannot blow up the
    // scale; fall back to all points for unlabeled frames.
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    bool any_labeled = false;
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        if (!frame.labels.empty() && frame.labels[i]) {
            any_labeled = true;
            lo = lo.cwiseMin(frame.points[i]);
            hi = hi.cwiseMax(frame.points[i]);
        }
    }
    if (!any_labeled) {
        for (const auto& p : frame.points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }

    const Vec3 extent = hi - lo;
    const double span = policy == BboxPolicy::diagonal ? extent.norm() : extent.maxCoeff();
    if (span < 1e-12)
        throw std::invalid_argument("normalize_frame: degenerate bounding box");

    NormalizedFrame out;
    out.info.scale = (1.0 - 2.0 * margin) / span;
    const Vec3 center = 0.5 * (lo + hi);
    out.info.offset = Vec3::Constant(0.5) - out.info.scale * center;

    out.coords.resize(frame.points.size(), 3);
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        Vec3 n = out.info.apply(frame.points[i]);
        if ((n.array() < 0.0).any() || (n.array() > 1.0).any()) {
            out.clamped.push_back(static_cast<int>(i));
            n = n.cwiseMax(0.0).cwiseMin(1.0);
        }
        out.coords.row(i) = n.transpose();
    }
    return out;
}

Points denormalize(const NormalizeInfo& info, const Points& coords) {
    Points out(coords.rows(), 3);
    for (int i = 0; i < coords.rows(); ++i)
        out.row(i) = info.invert(coords.row(i).transpose()).transpose();
    return out;
}

namespace {

// (u, v, depth) of a normalized point in the given view.
Vec3 view_coords(const Vec3& p, GridView view) {
    if (view == GridView::xy) return Vec3(p.x(), p.y(), p.z());
    if (view == GridView::yz) return Vec3(p.z(), p.y(), p.x());
    throw std::invalid_argument("view must be xy or yz");
}

int to_pixel(double coord, int resolution) {
    const int px = static_cast<int>(std::lround(coord * (resolution - 1)));
    return std::clamp(px, 0, resolution - 1);
}

}  // namespace

Mat render_ortho(const NormalizedFrame& frame, GridView view, int resolution) {
    Mat map = Mat::Zero(resolution, resolution);
    for (int i = 0; i < frame.coords.rows(); ++i) {
        const Vec3 c = view_coords(frame.coords.row(i).transpose(), view);
        const int col = to_pixel(c[0], resolution);
        const int row = to_pixel(c[1], resolution);
        const double depth = c[2];
        if (map(row, col) == 0.0 || depth < map(row, col)) map(row, col) = depth;
    }
    return map;
}

Mat encode_heatmap(const Vec2& coord, double sigma_px, int resolution) {
    if (sigma_px <= 0) throw std::invalid_argument("encode_heatmap: sigma must be positive");
    const double cu = coord[0] * (resolution - 1);
    const double cv = coord[1] * (resolution - 1);
    const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
    Mat map(resolution, resolution);
    for (int r = 0; r < resolution; ++r) {
        const double dv = r - cv;
        for (int c = 0; c < resolution; ++c) {
            const double du = c - cu;
            map(r, c) = std::exp(-(du * du + dv * dv) * inv);
        }
    }
    map /= map.sum();
    return map;
}

HeatmapStack encode_stack(const Points& coords, GridView view, double sigma_px, int resolution) {
    HeatmapStack stack;
    stack.view = view;
    stack.maps.reserve(coords.rows());
    for (int i = 0; i < coords.rows(); ++i) {
        const Vec3 c = view_coords(coords.row(i).transpose(), view);
        stack.maps.push_back(encode_heatmap(Vec2(c[0], c[1]), sigma_px, resolution));
    }
    return stack;
}

Vec2 soft_argmax(const Mat& map) {
    if ((map.array() < 0.0).any()) throw std::invalid_argument("soft_argmax: negative weights");
    const double sum = map.sum();
    if (sum <= 0.0) throw std::invalid_argument("soft_argmax: all-zero map");
    const int rows = static_cast<int>(map.rows());
    const int cols = static_cast<int>(map.cols());
    double u = 0, v = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double w = map(r, c);
            u += w * c;
            v += w * r;
        }
    return Vec2(u / (sum * (cols - 1)), v / (sum * (rows - 1)));
}

Vec2 soft_argmax(const Mat& map, double temperature) {
    if (temperature <= 0) throw std::invalid_argument("soft_argmax: temperature must be positive");
    const double peak = map.maxCoeff();
    Mat soft = ((map.array() - peak) / temperature).exp();
    return soft_argmax(soft);
}

NormalizedFrame marginal_fuse(const HeatmapStack& hm_xy, const HeatmapStack& hm_yz,
                              const NormalizeInfo* info) {
    if (hm_xy.maps.size() != hm_yz.maps.size())
        throw std::invalid_argument("marginal_fuse: landmark count mismatch");
    NormalizedFrame out;
    if (info) out.info = *info;
    out.coords.resize(hm_xy.maps.size(), 3);
    for (std::size_t i = 0; i < hm_xy.maps.size(); ++i) {
        const Vec2 xy = soft_argmax(hm_xy.maps[i]);
        const Vec2 yz = soft_argmax(hm_yz.maps[i]);
        out.coords(static_cast<int>(i), 0) = xy[0];
        out.coords(static_cast<int>(i), 1) = 0.5 * (xy[1] + yz[1]);
        out.coords(static_cast<int>(i), 2) = yz[0];
    }
    return out;
}

double js_divergence(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("js_divergence: shape mismatch");
    if (std::abs(a.sum() - 1.0) > 1e-6 || std::abs(b.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("js_divergence: heatmaps must be normalized");
    double kl_a = 0, kl_b = 0;  // KL(a||m), KL(b||m) with 0 log 0 = 0
    for (int r = 0; r < a.rows(); ++r) {
        for (int c = 0; c < a.cols(); ++c) {
            const double pa = a(r, c);
            const double pb = b(r, c);
            const double m = 0.5 * (pa + pb);
            if (pa > 0) kl_a += pa * std::log(pa / m);
            if (pb > 0) kl_b += pb * std::log(pb / m);
        }
    }
    return 0.5 * kl_a + 0.5 * kl_b;
}

double welsch(double residual, double nu) {
    if (nu <= 0) throw std::invalid_argument("welsch: nu must be positive");
    return 1.0 - std::exp(-(residual * residual) / (2.0 * nu * nu));
}

double total_loss(const HeatmapStack& gt_xy, const HeatmapStack& est_xy,
                  const HeatmapStack& gt_yz, const HeatmapStack& est_yz, const Points& gt_coords,
                  const Points& est_coords, double rho, const LossWeights& weights) {
    const std::size_t n = gt_xy.maps.size();
    if (est_xy.maps.size() != n || gt_yz.maps.size() != n || est_yz.maps.size() != n ||
        gt_coords.rows() != static_cast<int>(n) || est_coords.rows() != static_cast<int>(n))
        throw std::invalid_argument("total_loss: landmark count mismatch");
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double js = js_divergence(gt_xy.maps[i], est_xy.maps[i]) +
                          js_divergence(gt_yz.maps[i], est_yz.maps[i]);
        const double r =
            (gt_coords.row(static_cast<int>(i)) - est_coords.row(static_cast<int>(i))).norm();
        loss += rho * (weights.lambda_js * js + weights.lambda_welsch * welsch(r, weights.nu));
    }
    return loss;
}

}  // namespace mocap
