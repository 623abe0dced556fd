#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mocap/body_model.hpp"
#include "mocap/types.hpp"

namespace mocap {

// ---- body model file (JSON) ------------------------------------------------

BodyModel load_body_model(const std::string& path);
void save_body_model(const BodyModel& model, const std::string& path);

// ---- frame stream (one JSON record per line) --------------------------------
//
// {"frame_id": 7, "points": [[x,y,z], ...], "labels": ["LFHD", null, ...]}

std::vector<MarkerFrame> read_frame_stream(const std::string& path);
void write_frame_stream(const std::vector<MarkerFrame>& frames, const std::string& path);

MarkerFrame frame_from_json_line(const std::string& line);
std::string frame_to_json_line(const MarkerFrame& frame);

// ---- pose stream -------------------------------------------------------------
//
// {"frame_id": 7, "beta": [...], "theta": [...],
//  "root": {"axis_angle": [...], "translation": [...]}}

struct PoseRecord {
    std::int64_t frame_id = 0;
    BodyParams params;
};

std::vector<PoseRecord> read_pose_stream(const std::string& path);
void write_pose_stream(const std::vector<PoseRecord>& poses, const std::string& path);

// ---- fit results ---------------------------------------------------------------

struct FitRecord {
    std::int64_t frame_id = 0;
    BodyParams params;
    Vec z;
    Vec sigma;
    double energy = 0.0;
    bool converged = false;
    std::vector<int> stage_iterations;
};

std::vector<FitRecord> read_fit_stream(const std::string& path);
void write_fit_stream(const std::vector<FitRecord>& fits, const std::string& path);

// ---- flat binary grid container ---------------------------------------------
//
// Header: magic "MGRD", then u32 view (0 = xy, 1 = yz, 2 = none), u32
// width, u32 height, u32 channels, all little-endian. Payload: channels x
// height x width float32, row-major, little-endian.

enum class GridView : std::uint32_t { xy = 0, yz = 1, none = 2 };

struct GridFile {
    GridView view = GridView::none;
    std::vector<Mat> channels;  // each height x width
};

GridFile read_grid(const std::string& path);
void write_grid(const GridFile& grid, const std::string& path);

/// Writes content to path atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace mocap
