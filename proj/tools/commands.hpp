#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mocap/body_model.hpp"
#include "mocap/fitter.hpp"

namespace mocap::tool {

struct ModelOptions {
    std::string layout = "53x18";
    std::string output;
};
int cmd_model(const ModelOptions& opt);

struct SynthOptions {
    std::string model;
    std::string poses;        // input pose stream; empty with random > 0
    int random = 0;           // number of random poses to draw
    double pose_range = 0.5;  // radians per axis
    double shape_range = 0.5;
    bool random_root = false;
    std::string landmarks = "markers";  // markers | all
    std::string output;
    std::string gt_output;    // optional: all landmarks, labeled
    std::string poses_out;    // optional: poses actually used
    std::uint64_t seed = 0;
    int jobs = 0;
};
int cmd_synth(const SynthOptions& opt);

struct CorruptOptions {
    std::string model;
    std::string input;
    std::string poses;  // optional; enables the augmentation stages
    std::string config;
    std::string output;
    std::string poses_out;
    std::string provenance;
    std::uint64_t seed = 0;
    int jobs = 0;
};
int cmd_corrupt(const CorruptOptions& opt);

struct BalanceAnchorsOptions {
    std::string model;
    std::string poses;
    std::string pca;      // load instead of fitting
    int latent = 32;      // fit dimension when pca is empty
    std::string pca_out;  // where to store a freshly fit autoencoder
    double threshold_std = 2.0;
    std::string output;
    std::string relevance_out;  // optional epsilon/relevance dump
    std::string variant = "exp1p";
    double sigma = 0.0;  // 0 = dataset mean epsilon
};
int cmd_balance_anchors(const BalanceAnchorsOptions& opt);

struct BalanceSampleOptions {
    std::string pca;
    std::string anchors;
    int count = 100;
    std::string mode = "slerp";  // slerp | lerp | random
    double max_blend = 1.0;
    double jitter_scale = 0.1;  // of the per-dimension latent scale
    std::string output;
    std::string synthesis_report;  // optional div/fid/synthesis json
    std::uint64_t seed = 0;
};
int cmd_balance_sample(const BalanceSampleOptions& opt);

struct BalanceRelevanceOptions {
    std::string model;
    std::string poses;
    std::string pca;
    std::string variant = "exp1p";  // exp1p | sigmoid | exp-clamped
    double sigma = 0.0;             // 0 = dataset mean epsilon
    std::string output;
};
int cmd_balance_relevance(const BalanceRelevanceOptions& opt);

struct RenderOptions {
    std::string input;
    std::string output_dir;
    int resolution = 160;
    double margin = 0.1;
    std::string policy = "max-extent";  // max-extent | diagonal
    bool heatmaps = false;
    double sigma_px = 2.0;
    std::uint64_t seed = 0;
    int jobs = 0;
};
int cmd_render(const RenderOptions& opt);

struct FitOptions {
    std::string model;
    std::string input;
    std::string pca;  // pose prior; empty with direct_theta
    bool direct_theta = false;
    std::string mode = "noise-aware";  // noise-aware | plain | barron
    std::string targets = "all";       // markers | all
    std::string output;
    double lambda_beta = 1e-3;
    double lambda_z = 1e-3;
    double sigma_init = 0.02;
    bool squared_residual = false;
    bool warm_start = false;  // seed each frame with the previous solution
    std::uint64_t seed = 0;
    int jobs = 0;
};
int cmd_fit(const FitOptions& opt);

struct EvalOptions {
    std::string gt;        // landmark frames
    std::string est;       // landmark frames
    std::string model;     // with gt_poses/est_fits
    std::string gt_poses;  // pose stream
    std::string est_fits;  // fit results
    std::string report;
    std::string csv;
    std::string dataset = "dataset";
    std::string run_mode = "default";
};
int cmd_eval(const EvalOptions& opt);

struct ReportOptions {
    std::vector<std::string> items;  // dataset:mode:path triples
    std::string output;
};
int cmd_report(const ReportOptions& opt);

struct CaptureSimulateOptions {
    std::string rig;
    std::string scene;
    std::string output_dir;
    double depth_noise = 0.0;
    double marker_radius = 0.0095;
    std::uint64_t seed = 0;
    int jobs = 0;
};
int cmd_capture_simulate(const CaptureSimulateOptions& opt);

struct CaptureExtractOptions {
    std::string rig;
    std::string input_dir;
    std::string output;
    std::string observations;  // optional per-sensor dump
    double threshold = 0.5;
    int min_area = 3;
    double radius = 0.01;
    std::uint64_t seed = 0;
    int jobs = 0;
};
int cmd_capture_extract(const CaptureExtractOptions& opt);

struct CaptureCalibrateOptions {
    std::string tracks;
    std::string rig_init;
    std::string output;
    std::string gravity;  // optional frame file with the three floor markers
};
int cmd_capture_calibrate(const CaptureCalibrateOptions& opt);

// Shared helpers.

/// Marker frame (optionally with joints) synthesized from one pose.
MarkerFrame synthesize_frame(const BodyModel& model, const BodyParams& params,
                             bool include_joints, std::int64_t frame_id);

/// Fit targets from a labeled frame: rows and mask in model landmark
/// order; unlabeled points are ignored.
std::pair<Points, std::vector<bool>> targets_from_frame(const BodyModel& model,
                                                        const MarkerFrame& frame,
                                                        bool markers_only);

}  // namespace mocap::tool
