#include <filesystem>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "commands.hpp"
#include "mocap/autoencoder.hpp"
#include "mocap/geometry.hpp"
#include "mocap/heatmap.hpp"
#include "mocap/io.hpp"
#include "mocap/metrics.hpp"
#include "tool_util.hpp"

namespace mocap::tool {

int cmd_render(const RenderOptions& opt) {
    RunManifest manifest;
    manifest.command = "render";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.input};
    manifest.outputs = {opt.output_dir};

    const std::vector<MarkerFrame> frames = read_frame_stream(opt.input);
    std::filesystem::create_directories(opt.output_dir);

    BboxPolicy policy;
    if (opt.policy == "max-extent")
        policy = BboxPolicy::max_extent;
    else if (opt.policy == "diagonal")
        policy = BboxPolicy::diagonal;
    else
        throw std::invalid_argument("render: unknown bbox policy " + opt.policy);

    std::vector<std::string> norm_lines(frames.size());
    {
        StageTimer timer(manifest, "render");
        const int jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
        parallel_for(static_cast<int>(frames.size()), jobs, [&](int i) {
            const MarkerFrame& frame = frames[i];
            const NormalizedFrame n = normalize_frame(frame, policy, opt.margin);
            const std::string stem =
                opt.output_dir + "/frame_" + std::to_string(frame.frame_id);

            GridFile xy, yz;
            xy.view = GridView::xy;
            xy.channels.push_back(render_ortho(n, GridView::xy, opt.resolution));
            write_grid(xy, stem + "_xy.mgrd");
            yz.view = GridView::yz;
            yz.channels.push_back(render_ortho(n, GridView::yz, opt.resolution));
            write_grid(yz, stem + "_yz.mgrd");

            if (opt.heatmaps) {
                GridFile hm_xy, hm_yz;
                hm_xy.view = GridView::xy;
                hm_xy.channels =
                    encode_stack(n.coords, GridView::xy, opt.sigma_px, opt.resolution).maps;
                write_grid(hm_xy, stem + "_hm_xy.mgrd");
                hm_yz.view = GridView::yz;
                hm_yz.channels =
                    encode_stack(n.coords, GridView::yz, opt.sigma_px, opt.resolution).maps;
                write_grid(hm_yz, stem + "_hm_yz.mgrd");
            }

            nlohmann::json j;
            j["frame_id"] = frame.frame_id;
            j["scale"] = n.info.scale;
            j["offset"] = {n.info.offset.x(), n.info.offset.y(), n.info.offset.z()};
            j["clamped"] = n.clamped;
            norm_lines[i] = j.dump();
        });
    }
    std::string norms;
    for (const auto& line : norm_lines) {
        norms += line;
        norms += '\n';
    }
    write_file_atomic(opt.output_dir + "/normalization.jsonl", norms);
    manifest.write(RunManifest::default_path(opt.output_dir + "/render"));
    return 0;
}

int cmd_fit(const FitOptions& opt) {
    RunManifest manifest;
    manifest.command = "fit";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.model, opt.input};
    manifest.outputs = {opt.output};

    const BodyModel model = load_body_model(opt.model);
    const std::vector<MarkerFrame> frames = read_frame_stream(opt.input);

    std::unique_ptr<PcaAutoencoder> ae;
    FitConfig config;
    config.lambda_beta = opt.lambda_beta;
    config.lambda_z = opt.lambda_z;
    config.sigma_init = opt.sigma_init;
    config.squared_residual = opt.squared_residual;
    if (opt.direct_theta) {
        config.direct_theta = true;
    } else {
        if (opt.pca.empty())
            throw std::invalid_argument("fit: need --pca or --direct-theta");
        manifest.inputs.push_back(opt.pca);
        ae = std::make_unique<PcaAutoencoder>(PcaAutoencoder::load(opt.pca));
    }
    if (opt.mode == "noise-aware")
        config.mode = FitMode::noise_aware;
    else if (opt.mode == "plain")
        config.mode = FitMode::plain;
    else if (opt.mode == "barron")
        config.mode = FitMode::barron;
    else
        throw std::invalid_argument("fit: unknown mode " + opt.mode);
    if (config.mode == FitMode::plain) config.sigma_init = 1.0;

    const bool markers_only = opt.targets == "markers";
    if (opt.targets != "markers" && opt.targets != "all")
        throw std::invalid_argument("fit: --targets must be markers or all");

    std::vector<FitRecord> records(frames.size());
    auto fit_one = [&](int i, const std::optional<BodyParams>& warm) {
        const MarkerFrame& frame = frames[i];
        FitProblem problem;
        problem.model = &model;
        problem.ae = ae.get();
        std::tie(problem.targets, problem.observed) =
            targets_from_frame(model, frame, markers_only);
        FitConfig frame_config = config;
        frame_config.initial = warm;
        const FitResult result = fit(problem, frame_config);
        FitRecord rec;
        rec.frame_id = frame.frame_id;
        rec.params = result.params;
        rec.z = result.z;
        rec.sigma = result.sigma;
        rec.energy = result.energy;
        rec.converged = result.converged;
        rec.stage_iterations = result.stage_iterations;
        records[i] = std::move(rec);
    };

    {
        StageTimer timer(manifest, "fit");
        if (opt.warm_start) {
            // Sequence mode: single-threaded, each frame seeded by the
            // previous solution.
            std::optional<BodyParams> warm;
            for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
                fit_one(i, warm);
                warm = records[i].params;
            }
        } else {
            const int jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
            parallel_for(static_cast<int>(frames.size()), jobs,
                         [&](int i) { fit_one(i, std::nullopt); });
        }
    }
    write_fit_stream(records, opt.output);
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

namespace {

// Landmark positions matched by label between two frames.
std::pair<Points, Points> match_by_label(const MarkerFrame& gt, const MarkerFrame& est) {
    std::map<std::string, Vec3> est_by_label;
    for (std::size_t i = 0; i < est.points.size(); ++i)
        if (est.labels[i]) est_by_label[*est.labels[i]] = est.points[i];
    std::vector<std::pair<Vec3, Vec3>> pairs;
    for (std::size_t i = 0; i < gt.points.size(); ++i) {
        if (!gt.labels[i]) continue;
        const auto it = est_by_label.find(*gt.labels[i]);
        if (it == est_by_label.end()) continue;
        pairs.emplace_back(gt.points[i], it->second);
    }
    Points a(pairs.size(), 3), b(pairs.size(), 3);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        a.row(i) = pairs[i].first.transpose();
        b.row(i) = pairs[i].second.transpose();
    }
    return {a, b};
}

}  // namespace

int cmd_eval(const EvalOptions& opt) {
    RunManifest manifest;
    manifest.command = "eval";
    manifest.outputs = {opt.report};

    std::vector<Points> gt_sets, est_sets;
    std::vector<std::vector<Mat3>> gt_rots, est_rots;

    if (!opt.gt.empty() && !opt.est.empty()) {
        manifest.inputs = {opt.gt, opt.est};
        std::map<std::int64_t, MarkerFrame> est_frames;
        for (auto& f : read_frame_stream(opt.est)) est_frames[f.frame_id] = std::move(f);
        for (const auto& gt_frame : read_frame_stream(opt.gt)) {
            const auto it = est_frames.find(gt_frame.frame_id);
            if (it == est_frames.end()) continue;
            auto [a, b] = match_by_label(gt_frame, it->second);
            if (a.rows() == 0) continue;
            gt_sets.push_back(std::move(a));
            est_sets.push_back(std::move(b));
        }
    } else if (!opt.model.empty() && !opt.gt_poses.empty() && !opt.est_fits.empty()) {
        manifest.inputs = {opt.model, opt.gt_poses, opt.est_fits};
        const BodyModel model = load_body_model(opt.model);
        std::map<std::int64_t, BodyParams> est;
        for (auto& rec : read_fit_stream(opt.est_fits)) est[rec.frame_id] = rec.params;
        for (const auto& rec : read_pose_stream(opt.gt_poses)) {
            const auto it = est.find(rec.frame_id);
            if (it == est.end()) continue;
            const LandmarkSet gt_lm = landmarks_of(model, rec.params);
            const LandmarkSet est_lm = landmarks_of(model, it->second);
            const std::vector<int> joints = gt_lm.indices_of(LandmarkKind::joint);
            Points a(joints.size(), 3), b(joints.size(), 3);
            for (std::size_t i = 0; i < joints.size(); ++i) {
                a.row(i) = gt_lm.positions.row(joints[i]);
                b.row(i) = est_lm.positions.row(joints[i]);
            }
            gt_sets.push_back(std::move(a));
            est_sets.push_back(std::move(b));

            std::vector<Mat3> ra, rb;
            for (int j = 0; j < model.joint_count(); ++j) {
                ra.push_back(rodrigues(rec.params.theta.segment<3>(3 * j)));
                rb.push_back(rodrigues(it->second.theta.segment<3>(3 * j)));
            }
            gt_rots.push_back(std::move(ra));
            est_rots.push_back(std::move(rb));
        }
    } else {
        throw std::invalid_argument(
            "eval: need --gt/--est frames or --model/--gt-poses/--est-fits");
    }
    if (gt_sets.empty()) throw std::invalid_argument("eval: no overlapping frames");

    EvalReport report;
    {
        StageTimer timer(manifest, "metrics");
        report.rmse = rmse_mm(gt_sets, est_sets);
        report.pck1 = pck_percent(gt_sets, est_sets, 0.010);
        report.pck3 = pck_percent(gt_sets, est_sets, 0.030);
        report.pck7 = pck_percent(gt_sets, est_sets, 0.070);
        if (!gt_rots.empty()) report.mae = mae_geodesic_degrees(gt_rots, est_rots);
        fill_indicators(report);
    }
    report.save(opt.report);
    if (!opt.csv.empty()) {
        write_file_atomic(opt.csv, report_csv({{opt.dataset, opt.run_mode, report}}));
        manifest.outputs.push_back(opt.csv);
    }
    manifest.write(RunManifest::default_path(opt.report));
    return 0;
}

int cmd_report(const ReportOptions& opt) {
    RunManifest manifest;
    manifest.command = "report";
    manifest.outputs = {opt.output};

    std::vector<std::tuple<std::string, std::string, EvalReport>> rows;
    for (const auto& item : opt.items) {
        const auto first = item.find(':');
        const auto second = item.find(':', first + 1);
        if (first == std::string::npos || second == std::string::npos)
            throw std::invalid_argument("report: items are dataset:mode:path, got " + item);
        const std::string dataset = item.substr(0, first);
        const std::string mode = item.substr(first + 1, second - first - 1);
        const std::string path = item.substr(second + 1);
        manifest.inputs.push_back(path);
        rows.emplace_back(dataset, mode, EvalReport::load(path));
    }
    if (rows.empty()) throw std::invalid_argument("report: no input reports");
    write_file_atomic(opt.output, report_csv(rows));
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

}  // namespace mocap::tool
