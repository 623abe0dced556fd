#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mocap/rng.hpp"
#include "mocap/types.hpp"

namespace mocap {

/// Pinhole depth sensor: intrinsics in pixels, extrinsics sensor -> world.
struct Sensor {
    int id = 0;
    int width = 640;
    int height = 576;
    Mat3 intrinsics = Mat3::Identity();  // upper triangular, positive focals
    RigidTransform extrinsics;

    void validate() const;
};

/// Pixel-registered infrared + depth pair. Depth 0 means invalid.
struct SensorFrame {
    Mat ir;     // height x width
    Mat depth;  // height x width, meters
    double timestamp = 0.0;
};

struct MarkerObservation {
    Vec3 position;  // world (or sensor frame during calibration)
    int sensor_id = 0;
    int support = 0;  // depth samples surviving rejection
};

/// Back-projection: the ray through the pixel scaled so z equals depth.
Vec3 unproject(const Sensor& sensor, const Vec2& pixel, double depth);

/// Pinhole projection of a sensor-frame point; empty when behind the
/// camera or outside the image.
std::optional<Vec2> project(const Sensor& sensor, const Vec3& point);

using PixelBlob = std::vector<std::pair<int, int>>;  // (row, col)

/// Connected components (8-connectivity) of ir > threshold; components
/// below min_area pixels are dropped. Blobs are reported in scanline
/// order of their first pixel.
std::vector<PixelBlob> extract_blobs(const Mat& ir, double threshold, int min_area = 3);

/// Marker estimate from one blob: valid-depth pixels are back-projected,
/// outliers rejected by the absolute deviation of z from its median
/// beyond mad_factor * 1.4826 * MAD, survivors averaged. Returns empty
/// when the blob carries no valid depth. Positions are in world
/// coordinates when to_world is set, sensor frame otherwise.
std::optional<MarkerObservation> blob_to_marker(const SensorFrame& frame, const Sensor& sensor,
                                                const PixelBlob& blob, bool to_world = true,
                                                double mad_factor = 3.0);

/// Greedy agglomerative clustering with a fixed radius, iterated to a
/// fixpoint. Input is canonically pre-sorted, so the result does not
/// depend on observation order. One unlabeled output point per cluster.
MarkerFrame fuse_and_cluster(const std::vector<MarkerObservation>& observations,
                             double radius = 0.01);

/// Time-indexed single-marker track of one sensor, in its own frame.
struct WandTrack {
    int sensor_id = 0;
    std::map<std::int64_t, Vec3> samples;
};

struct CalibrationResult {
    std::vector<RigidTransform> extrinsics;  // per track, first = identity
    double residual = 0.0;                   // RMS point residual, meters
    std::vector<double> residual_history;    // per refinement sweep
};

/// Wand calibration: sensor 0 defines the world frame; every other
/// sensor is initialized by rigid alignment on shared timestamps and all
/// extrinsics plus per-timestamp wand positions are then refined by
/// alternating least squares until the residual stops improving.
CalibrationResult calibrate_wand(const std::vector<WandTrack>& tracks,
                                 int max_sweeps = 100, double tol = 1e-14);

/// World alignment from three floor markers in an L arrangement: the
/// corner is the vertex off the longest pairwise segment, up is the
/// normalized cross product of the long and short edges (signed toward
/// +y), and the returned transform maps up to +y with the corner at
/// height zero. Edge lengths must differ by more than 10%.
RigidTransform gravity_align(const Vec3& a, const Vec3& b, const Vec3& c);

struct SensorSimConfig {
    double marker_radius = 0.0095;  // meters
    double min_disc_px = 2.5;       // clamp for far markers
    double depth_noise = 0.0;       // stddev, meters
    double ir_background = 0.0;
    double near_clip = 0.1;
};

/// Renders marker discs into an IR + depth pair: bright disc per visible
/// marker, depth invalid on the disc core and valid on the surrounding
/// ring (plus noise), mirroring how retroreflective markers blind a ToF
/// sensor at their center.
SensorFrame simulate_sensor(const MarkerFrame& scene, const Sensor& sensor,
                            const SensorSimConfig& config, Rng& rng);

std::vector<Sensor> load_rig(const std::string& path);
void save_rig(const std::vector<Sensor>& rig, const std::string& path);

}  // namespace mocap
