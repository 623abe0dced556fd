#include <map>
#include <stdexcept>

#include <json.hpp>

#include "commands.hpp"
#include "mocap/corruption.hpp"
#include "mocap/geometry.hpp"
#include "mocap/io.hpp"
#include "mocap/rng.hpp"
#include "mocap/synthetic_body.hpp"
#include "tool_util.hpp"

namespace mocap::tool {

MarkerFrame synthesize_frame(const BodyModel& model, const BodyParams& params,
                             bool include_joints, std::int64_t frame_id) {
    const LandmarkSet lm = landmarks_of(model, params);
    MarkerFrame frame;
    frame.frame_id = frame_id;
    for (int i = 0; i < lm.count(); ++i) {
        if (!include_joints && lm.kinds[i] == LandmarkKind::joint) continue;
        frame.points.push_back(lm.positions.row(i).transpose());
        frame.labels.push_back(lm.labels[i]);
    }
    return frame;
}

std::pair<Points, std::vector<bool>> targets_from_frame(const BodyModel& model,
                                                        const MarkerFrame& frame,
                                                        bool markers_only) {
    std::map<std::string, int> index;
    for (int i = 0; i < model.landmark_count(); ++i) index[model.landmark_labels[i]] = i;

    Points targets = Points::Zero(model.landmark_count(), 3);
    std::vector<bool> observed(model.landmark_count(), false);
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        if (!frame.labels[i]) continue;
        const auto it = index.find(*frame.labels[i]);
        if (it == index.end()) continue;
        if (markers_only && model.landmark_kinds[it->second] != LandmarkKind::marker) continue;
        targets.row(it->second) = frame.points[i].transpose();
        observed[it->second] = true;
    }
    return {targets, observed};
}

int cmd_model(const ModelOptions& opt) {
    BodyLayout layout;
    if (opt.layout == "53x18")
        layout = BodyLayout::markers53_joints18;
    else if (opt.layout == "56x24")
        layout = BodyLayout::markers56_joints24;
    else
        throw std::invalid_argument("model: unknown layout " + opt.layout);

    RunManifest manifest;
    manifest.command = "model";
    manifest.outputs = {opt.output};
    {
        StageTimer timer(manifest, "build");
        save_body_model(make_synthetic_body(layout), opt.output);
    }
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

int cmd_synth(const SynthOptions& opt) {
    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.model};
    manifest.outputs = {opt.output};

    const BodyModel model = load_body_model(opt.model);
    const Rng root(opt.seed);

    std::vector<PoseRecord> poses;
    if (!opt.poses.empty()) {
        manifest.inputs.push_back(opt.poses);
        poses = read_pose_stream(opt.poses);
        for (auto& rec : poses)  // shape-less poses (e.g. sampler output)
            if (rec.params.beta.size() == 0) rec.params.beta = Vec::Zero(model.shape_dim());
    } else if (opt.random > 0) {
        StageTimer timer(manifest, "draw-poses");
        for (int i = 0; i < opt.random; ++i) {
            Rng rng = root.derive("synth-pose", i);
            PoseRecord rec;
            rec.frame_id = i;
            rec.params = BodyParams::rest(model.shape_dim(), model.joint_count());
            for (int s = 0; s < rec.params.beta.size(); ++s)
                rec.params.beta[s] = rng.uniform(-opt.shape_range, opt.shape_range);
            for (int t = 0; t < rec.params.theta.size(); ++t)
                rec.params.theta[t] = rng.uniform(-opt.pose_range, opt.pose_range);
            if (opt.random_root) {
                rec.params.root.rotation = rodrigues(Vec3(0, rng.uniform(-M_PI, M_PI), 0));
                rec.params.root.translation =
                    Vec3(rng.uniform(-1, 1), 0.0, rng.uniform(-1, 1));
            }
            poses.push_back(std::move(rec));
        }
    } else {
        throw std::invalid_argument("synth: need --poses or --random N");
    }

    const bool include_joints = opt.landmarks == "all";
    if (opt.landmarks != "all" && opt.landmarks != "markers")
        throw std::invalid_argument("synth: --landmarks must be markers or all");

    std::vector<MarkerFrame> frames(poses.size());
    std::vector<MarkerFrame> gt_frames(poses.size());
    {
        StageTimer timer(manifest, "synthesize");
        const int jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
        parallel_for(static_cast<int>(poses.size()), jobs, [&](int i) {
            frames[i] =
                synthesize_frame(model, poses[i].params, include_joints, poses[i].frame_id);
            if (!opt.gt_output.empty())
                gt_frames[i] = synthesize_frame(model, poses[i].params, true, poses[i].frame_id);
        });
    }

    {
        StageTimer timer(manifest, "write");
        write_frame_stream(frames, opt.output);
        if (!opt.gt_output.empty()) {
            write_frame_stream(gt_frames, opt.gt_output);
            manifest.outputs.push_back(opt.gt_output);
        }
        if (!opt.poses_out.empty()) {
            write_pose_stream(poses, opt.poses_out);
            manifest.outputs.push_back(opt.poses_out);
        }
    }
    manifest.write(RunManifest::default_path(opt.output));
    log_info("synth: wrote " + std::to_string(frames.size()) + " frames");
    return 0;
}

int cmd_corrupt(const CorruptOptions& opt) {
    RunManifest manifest;
    manifest.command = "corrupt";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.model, opt.input};
    manifest.outputs = {opt.output};

    const BodyModel model = load_body_model(opt.model);
    const std::vector<MarkerFrame> frames = read_frame_stream(opt.input);

    CorruptionConfig config;
    if (!opt.config.empty()) {
        config = load_corruption_config(opt.config);
        manifest.configs.push_back(opt.config);
    }
    if (opt.seed != 0) config.seed = opt.seed;

    std::map<std::int64_t, BodyParams> poses;
    if (!opt.poses.empty()) {
        manifest.inputs.push_back(opt.poses);
        for (auto& rec : read_pose_stream(opt.poses)) poses.emplace(rec.frame_id, rec.params);
    } else if (config.p_shape_aug > 0 || config.p_flip > 0) {
        log_info("corrupt: no --poses given, disabling the augmentation stages");
        config.p_shape_aug = 0.0;
        config.p_flip = 0.0;
    }

    const FlipMetadata flip_meta = flip_metadata(model);
    const Rng root(config.seed);

    std::map<std::string, LandmarkKind> label_kind;
    for (int i = 0; i < model.landmark_count(); ++i)
        label_kind[model.landmark_labels[i]] = model.landmark_kinds[i];

    std::vector<MarkerFrame> corrupted(frames.size());
    std::vector<PoseRecord> poses_out(frames.size());
    std::vector<std::string> provenance(frames.size());
    {
        StageTimer timer(manifest, "corrupt");
        const int jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
        parallel_for(static_cast<int>(frames.size()), jobs, [&](int i) {
            const MarkerFrame& frame = frames[i];
            BodyParams params = BodyParams::rest(model.shape_dim(), model.joint_count());
            const auto pose_it = poses.find(frame.frame_id);
            if (pose_it != poses.end()) params = pose_it->second;

            // Regenerate with the frame's own landmark span when augmenting.
            Resynthesize resynth = nullptr;
            if (pose_it != poses.end()) {
                bool has_joints = false;
                for (const auto& l : frame.labels) {
                    const auto it = l ? label_kind.find(*l) : label_kind.end();
                    if (it != label_kind.end() && it->second == LandmarkKind::joint)
                        has_joints = true;
                }
                resynth = [&model, &frame, has_joints](const BodyParams& p) {
                    return synthesize_frame(model, p, has_joints, frame.frame_id);
                };
            }

            Rng rng = root.derive("corrupt", frame.frame_id);
            PipelineResult result =
                apply_pipeline(params, frame, config, rng, &flip_meta, resynth);
            result.frame.frame_id = frame.frame_id;
            corrupted[i] = std::move(result.frame);
            poses_out[i] = {frame.frame_id, result.params};

            nlohmann::json prov;
            prov["frame_id"] = frame.frame_id;
            prov["shape_aug"] = result.provenance.fired_shape_aug;
            prov["flip"] = result.provenance.fired_flip;
            prov["occlude"] = result.provenance.fired_occlude;
            prov["ghost"] = result.provenance.fired_ghost;
            prov["shift"] = result.provenance.fired_shift;
            prov["occluded_labels"] = result.provenance.occluded_labels;
            prov["ghost_count"] = result.provenance.ghost_count;
            prov["shifted_indices"] = result.provenance.shifted_indices;
            provenance[i] = prov.dump();
        });
    }

    {
        StageTimer timer(manifest, "write");
        write_frame_stream(corrupted, opt.output);
        if (!opt.poses_out.empty()) {
            write_pose_stream(poses_out, opt.poses_out);
            manifest.outputs.push_back(opt.poses_out);
        }
        if (!opt.provenance.empty()) {
            std::string out;
            for (const auto& line : provenance) {
                out += line;
                out += '\n';
            }
            write_file_atomic(opt.provenance, out);
            manifest.outputs.push_back(opt.provenance);
        }
    }
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

}  // namespace mocap::tool
