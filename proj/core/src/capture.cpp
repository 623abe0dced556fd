#include "mocap/capture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json_util.hpp"
#include "mocap/geometry.hpp"
#include "mocap/io.hpp"

namespace mocap {

using detail::json;

void Sensor::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("sensor: bad resolution");
    if (intrinsics(0, 0) <= 0 || intrinsics(1, 1) <= 0 || intrinsics(2, 2) != 1.0 ||
        intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0)
        throw std::invalid_argument("sensor: intrinsics must be upper triangular with positive focals");
    if (!is_rotation(extrinsics.rotation, 1e-6))
        throw std::invalid_argument("sensor: extrinsic rotation invalid");
}

Vec3 unproject(const Sensor& sensor, const Vec2& pixel, double depth) {
    if (depth <= 0) throw std::invalid_argument("unproject: depth must be positive");
    const Vec3 ray = sensor.intrinsics.inverse() * Vec3(pixel.x(), pixel.y(), 1.0);
    return ray * (depth / ray.z());
}

std::optional<Vec2> project(const Sensor& sensor, const Vec3& point) {
    if (point.z() <= 0) return std::nullopt;
    const Vec3 h = sensor.intrinsics * point;
    const Vec2 px(h.x() / h.z(), h.y() / h.z());
    if (px.x() < 0 || px.x() > sensor.width - 1 || px.y() < 0 || px.y() > sensor.height - 1)
        return std::nullopt;
    return px;
}

std::vector<PixelBlob> extract_blobs(const Mat& ir, double threshold, int min_area) {
    const int rows = static_cast<int>(ir.rows());
    const int cols = static_cast<int>(ir.cols());
    std::vector<int> label(static_cast<std::size_t>(rows) * cols, -1);
    std::vector<PixelBlob> blobs;

    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (ir(r, c) <= threshold || label[r * cols + c] >= 0) continue;
            const int id = static_cast<int>(blobs.size());
            blobs.emplace_back();
            stack.clear();
            stack.emplace_back(r, c);
            label[r * cols + c] = id;
            while (!stack.empty()) {
                const auto [pr, pc] = stack.back();
                stack.pop_back();
                blobs[id].emplace_back(pr, pc);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const int nr = pr + dr, nc = pc + dc;
                        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                        if (ir(nr, nc) <= threshold || label[nr * cols + nc] >= 0) continue;
                        label[nr * cols + nc] = id;
                        stack.emplace_back(nr, nc);
                    }
                }
            }
        }
    }

    std::vector<PixelBlob> kept;
    for (auto& b : blobs) {
        if (static_cast<int>(b.size()) < min_area) continue;
        std::sort(b.begin(), b.end());
        kept.push_back(std::move(b));
    }
    return kept;
}

std::optional<MarkerObservation> blob_to_marker(const SensorFrame& frame, const Sensor& sensor,
                                                const PixelBlob& blob, bool to_world,
                                                double mad_factor) {
    if (blob.empty()) throw std::invalid_argument("blob_to_marker: empty blob");

    std::vector<Vec3> points;
    points.reserve(blob.size());
    for (const auto& [r, c] : blob) {
        const double d = frame.depth(r, c);
        if (d <= 0) continue;
        points.push_back(unproject(sensor, Vec2(c, r), d));
    }
    if (points.empty()) return std::nullopt;

    // MAD rejection on z (range direction).
    std::vector<double> zs(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) zs[i] = points[i].z();
    std::vector<double> sorted = zs;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(zs[i] - median);
    std::vector<double> dev_sorted = dev;
    std::sort(dev_sorted.begin(), dev_sorted.end());
    const double mad = n % 2 ? dev_sorted[n / 2] : 0.5 * (dev_sorted[n / 2 - 1] + dev_sorted[n / 2]);
    // A zero MAD means the majority depth is exact; anything that deviates
    // (for example a second marker merged into the blob) is an outlier.
    const double cutoff = std::max(mad_factor * 1.4826 * mad, 1e-9);

    Vec3 mean = Vec3::Zero();
    int kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (dev[i] > cutoff) continue;
        mean += points[i];
        ++kept;
    }
    if (kept == 0) return std::nullopt;
    mean /= kept;

    MarkerObservation obs;
    obs.position = to_world ? sensor.extrinsics.apply(mean) : mean;
    obs.sensor_id = sensor.id;
    obs.support = kept;
    return obs;
}

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
}

}  // namespace

MarkerFrame fuse_and_cluster(const std::vector<MarkerObservation>& observations, double radius) {
    std::vector<Vec3> points;
    points.reserve(observations.size());
    for (const auto& o : observations) points.push_back(o.position);
    std::sort(points.begin(), points.end(), lex_less);

    struct Cluster {
        Vec3 sum = Vec3::Zero();
        int count = 0;
        Vec3 centroid() const { return sum / count; }
    };
    std::vector<Cluster> clusters;
    for (const auto& p : points) {
        int best = -1;
        double best_d = radius;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            const double d = (clusters[i].centroid() - p).norm();
            if (d <= best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) {
            clusters.push_back({p, 1});
        } else {
            clusters[best].sum += p;
            clusters[best].count += 1;
        }
    }

    // Merge clusters whose centroids ended up within the radius, to a
    // fixpoint.
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < clusters.size() && !merged; ++j) {
                if ((clusters[i].centroid() - clusters[j].centroid()).norm() <= radius) {
                    clusters[i].sum += clusters[j].sum;
                    clusters[i].count += clusters[j].count;
                    clusters.erase(clusters.begin() + static_cast<long>(j));
                    merged = true;
                }
            }
        }
    }

    std::vector<Vec3> centroids;
    centroids.reserve(clusters.size());
    for (const auto& c : clusters) centroids.push_back(c.centroid());
    std::sort(centroids.begin(), centroids.end(), lex_less);

    MarkerFrame out;
    for (const auto& c : centroids) {
        out.points.push_back(c);
        out.labels.push_back(std::nullopt);
    }
    return out;
}

CalibrationResult calibrate_wand(const std::vector<WandTrack>& tracks, int max_sweeps,
                                 double tol) {
    if (tracks.size() < 2) throw std::invalid_argument("calibrate_wand: need >= 2 sensors");

    const WandTrack& ref = tracks[0];
    CalibrationResult result;
    result.extrinsics.assign(tracks.size(), RigidTransform::identity());

    // Closed-form initialization against the reference track.
    for (std::size_t k = 1; k < tracks.size(); ++k) {
        std::vector<Vec3> src, dst;
        for (const auto& [t, p] : tracks[k].samples) {
            const auto it = ref.samples.find(t);
            if (it == ref.samples.end()) continue;
            src.push_back(p);
            dst.push_back(it->second);
        }
        if (src.size() < 3)
            throw std::invalid_argument("calibrate_wand: insufficient overlap with sensor 0");
        Points src_m(src.size(), 3), dst_m(dst.size(), 3);
        for (std::size_t i = 0; i < src.size(); ++i) {
            src_m.row(i) = src[i].transpose();
            dst_m.row(i) = dst[i].transpose();
        }
        result.extrinsics[k] = kabsch(src_m, dst_m);  // throws when collinear
    }

    // Gather all timestamps seen by >= 1 sensor.
    std::map<std::int64_t, Vec3> wand;  // world estimates
    auto residual_pass = [&]() -> double {
        // Wand update: average the transformed observations per timestamp.
        wand.clear();
        std::map<std::int64_t, int> counts;
        for (std::size_t k = 0; k < tracks.size(); ++k) {
            for (const auto& [t, p] : tracks[k].samples) {
                const Vec3 w = result.extrinsics[k].apply(p);
                auto [it, inserted] = wand.try_emplace(t, Vec3::Zero());
                it->second += w;
                counts[t] += 1;
            }
        }
        for (auto& [t, w] : wand) w /= counts[t];

        double sq = 0;
        int n = 0;
        for (std::size_t k = 0; k < tracks.size(); ++k) {
            for (const auto& [t, p] : tracks[k].samples) {
                sq += (result.extrinsics[k].apply(p) - wand[t]).squaredNorm();
                ++n;
            }
        }
        return std::sqrt(sq / n);
    };

    double prev = residual_pass();
    result.residual_history.push_back(prev);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        // Extrinsic update per non-reference sensor (sensor 0 pins the
        // frame).
        for (std::size_t k = 1; k < tracks.size(); ++k) {
            Points src(tracks[k].samples.size(), 3), dst(tracks[k].samples.size(), 3);
            int row = 0;
            for (const auto& [t, p] : tracks[k].samples) {
                src.row(row) = p.transpose();
                dst.row(row) = wand[t].transpose();
                ++row;
            }
            result.extrinsics[k] = kabsch(src, dst);
        }
        const double now = residual_pass();
        result.residual_history.push_back(now);
        if (prev - now < tol) {
            prev = now;
            break;
        }
        prev = now;
    }
    result.residual = prev;
    return result;
}

RigidTransform gravity_align(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 pts[3] = {a, b, c};
    // The corner is the vertex not on the longest pairwise segment.
    const double d01 = (pts[0] - pts[1]).norm();
    const double d02 = (pts[0] - pts[2]).norm();
    const double d12 = (pts[1] - pts[2]).norm();
    int corner;
    if (d01 >= d02 && d01 >= d12)
        corner = 2;
    else if (d02 >= d01 && d02 >= d12)
        corner = 1;
    else
        corner = 0;
    const Vec3 e1 = pts[(corner + 1) % 3] - pts[corner];
    const Vec3 e2 = pts[(corner + 2) % 3] - pts[corner];
    double long_len = e1.norm(), short_len = e2.norm();
    Vec3 long_edge = e1, short_edge = e2;
    if (short_len > long_len) {
        std::swap(long_edge, short_edge);
        std::swap(long_len, short_len);
    }
    if (long_len < 1e-9 || short_len < 1e-9)
        throw std::invalid_argument("gravity_align: degenerate markers");
    if (long_len < 1.1 * short_len)
        throw std::invalid_argument("gravity_align: edge lengths too similar to disambiguate");

    Vec3 up = long_edge.cross(short_edge);
    if (up.norm() < 1e-9 * long_len * short_len)
        throw std::invalid_argument("gravity_align: collinear markers");
    up.normalize();
    if (up.y() < 0) up = -up;  // toward the current +y hemisphere

    RigidTransform out;
    const Vec3 target = Vec3::UnitY();
    const Vec3 axis = up.cross(target);
    const double s = axis.norm();
    const double cos_angle = std::clamp(up.dot(target), -1.0, 1.0);
    if (s < 1e-12) {
        out.rotation = cos_angle > 0 ? Mat3::Identity() : rodrigues(Vec3(M_PI, 0, 0));
    } else {
        out.rotation = rodrigues(axis / s * std::atan2(s, cos_angle));
    }
    out.translation = Vec3(0, -(out.rotation * pts[corner]).y(), 0);
    return out;
}

SensorFrame simulate_sensor(const MarkerFrame& scene, const Sensor& sensor,
                            const SensorSimConfig& config, Rng& rng) {
    SensorFrame frame;
    frame.ir = Mat::Constant(sensor.height, sensor.width, config.ir_background);
    frame.depth = Mat::Zero(sensor.height, sensor.width);
    Mat disc_depth = Mat::Zero(sensor.height, sensor.width);  // z-buffer over discs

    const RigidTransform world_to_sensor = sensor.extrinsics.inverse();
    for (const auto& world_p : scene.points) {
        const Vec3 p = world_to_sensor.apply(world_p);
        if (p.z() < config.near_clip) continue;
        const auto center = project(sensor, p);
        if (!center) continue;

        const double fx = sensor.intrinsics(0, 0);
        const double r_px = std::max(fx * config.marker_radius / p.z(), config.min_disc_px);
        const double ring_inner = 0.45 * r_px;
        const double noisy_z = p.z() + (config.depth_noise > 0
                                            ? rng.normal(0.0, config.depth_noise)
                                            : 0.0);

        const int r_lo = std::max(0, static_cast<int>(std::floor(center->y() - r_px - 1)));
        const int r_hi = std::min(sensor.height - 1,
                                  static_cast<int>(std::ceil(center->y() + r_px + 1)));
        const int c_lo = std::max(0, static_cast<int>(std::floor(center->x() - r_px - 1)));
        const int c_hi = std::min(sensor.width - 1,
                                  static_cast<int>(std::ceil(center->x() + r_px + 1)));
        for (int r = r_lo; r <= r_hi; ++r) {
            for (int c = c_lo; c <= c_hi; ++c) {
                const double dist = std::hypot(r - center->y(), c - center->x());
                if (dist > r_px) continue;
                if (disc_depth(r, c) != 0.0 && disc_depth(r, c) < p.z()) continue;
                disc_depth(r, c) = p.z();
                frame.ir(r, c) = 1.0;
                // ToF range is blinded at the marker core; the surrounding
                // ring inside the disc measures the marker depth.
                frame.depth(r, c) = dist >= ring_inner ? noisy_z : 0.0;
            }
        }
    }
    return frame;
}

std::vector<Sensor> load_rig(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    std::vector<Sensor> rig;
    for (const auto& js : j.at("sensors")) {
        Sensor s;
        s.id = js.at("id").get<int>();
        s.width = js.at("width").get<int>();
        s.height = js.at("height").get<int>();
        s.intrinsics = Mat3::Identity();
        s.intrinsics(0, 0) = js.at("fx").get<double>();
        s.intrinsics(1, 1) = js.at("fy").get<double>();
        s.intrinsics(0, 2) = js.at("cx").get<double>();
        s.intrinsics(1, 2) = js.at("cy").get<double>();
        if (js.contains("skew")) s.intrinsics(0, 1) = js.at("skew").get<double>();
        if (js.contains("extrinsics")) {
            s.extrinsics.rotation =
                rodrigues(detail::vec3_from(js.at("extrinsics").at("axis_angle")));
            s.extrinsics.translation = detail::vec3_from(js.at("extrinsics").at("translation"));
        }
        s.validate();
        rig.push_back(std::move(s));
    }
    return rig;
}

void save_rig(const std::vector<Sensor>& rig, const std::string& path) {
    json sensors = json::array();
    for (const auto& s : rig) {
        json js;
        js["id"] = s.id;
        js["width"] = s.width;
        js["height"] = s.height;
        js["fx"] = s.intrinsics(0, 0);
        js["fy"] = s.intrinsics(1, 1);
        js["cx"] = s.intrinsics(0, 2);
        js["cy"] = s.intrinsics(1, 2);
        if (s.intrinsics(0, 1) != 0.0) js["skew"] = s.intrinsics(0, 1);
        js["extrinsics"] = {
            {"axis_angle", detail::to_json(axis_angle_from_rotation(s.extrinsics.rotation))},
            {"translation", detail::to_json(s.extrinsics.translation)}};
        sensors.push_back(std::move(js));
    }
    json j;
    j["sensors"] = std::move(sensors);
    write_file_atomic(path, j.dump(2));
}

}  // namespace mocap
