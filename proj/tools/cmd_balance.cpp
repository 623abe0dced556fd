#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "commands.hpp"
#include "mocap/balance.hpp"
#include "mocap/io.hpp"
#include "tool_util.hpp"

namespace mocap::tool {

namespace {

RelevanceVariant parse_variant(const std::string& name) {
    if (name == "exp1p") return RelevanceVariant::exp1p;
    if (name == "sigmoid") return RelevanceVariant::sigmoid;
    if (name == "exp-clamped") return RelevanceVariant::exp_clamped;
    throw std::invalid_argument("unknown relevance variant " + name);
}

std::vector<Vec> read_theta_dataset(const std::string& path, std::vector<std::int64_t>* ids) {
    std::vector<Vec> poses;
    for (const auto& rec : read_pose_stream(path)) {
        poses.push_back(rec.params.theta);
        if (ids) ids->push_back(rec.frame_id);
    }
    if (poses.empty()) throw std::invalid_argument("empty pose dataset: " + path);
    return poses;
}

double mean_of(const std::vector<double>& values) {
    double sum = 0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

int cmd_balance_anchors(const BalanceAnchorsOptions& opt) {
    RunManifest manifest;
    manifest.command = "balance anchors";
    manifest.inputs = {opt.model, opt.poses};
    manifest.outputs = {opt.output};

    const BodyModel model = load_body_model(opt.model);
    std::vector<std::int64_t> ids;
    const std::vector<Vec> poses = read_theta_dataset(opt.poses, &ids);

    std::unique_ptr<PcaAutoencoder> ae;
    {
        StageTimer timer(manifest, "autoencoder");
        if (!opt.pca.empty()) {
            manifest.inputs.push_back(opt.pca);
            ae = std::make_unique<PcaAutoencoder>(PcaAutoencoder::load(opt.pca));
        } else {
            ae = std::make_unique<PcaAutoencoder>(PcaAutoencoder::fit(poses, opt.latent));
            if (!opt.pca_out.empty()) {
                ae->save(opt.pca_out);
                manifest.outputs.push_back(opt.pca_out);
            }
        }
    }

    AnchorSet set;
    {
        StageTimer timer(manifest, "select");
        set = select_anchors(poses, *ae, model, opt.threshold_std);
        if (set.empty_warning) log_info("balance anchors: no pose exceeded the threshold");
    }
    set.save(opt.output);

    if (!opt.relevance_out.empty()) {
        StageTimer timer(manifest, "relevance");
        const std::vector<double> eps =
            reconstruction_errors(model, *ae, poses, Vec::Zero(model.shape_dim()));
        RelevanceConfig config;
        config.variant = parse_variant(opt.variant);
        config.sigma = opt.sigma > 0 ? opt.sigma : mean_of(eps);
        std::string out;
        for (std::size_t i = 0; i < poses.size(); ++i) {
            nlohmann::json j;
            j["frame_id"] = ids[i];
            j["epsilon"] = eps[i];
            j["relevance"] = relevance(eps[i], config);
            out += j.dump();
            out += '\n';
        }
        write_file_atomic(opt.relevance_out, out);
        manifest.outputs.push_back(opt.relevance_out);
    }
    manifest.write(RunManifest::default_path(opt.output));
    log_info("balance anchors: " + std::to_string(set.anchors.size()) + " anchors");
    return 0;
}

int cmd_balance_sample(const BalanceSampleOptions& opt) {
    RunManifest manifest;
    manifest.command = "balance sample";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.pca, opt.anchors};
    manifest.outputs = {opt.output};

    const PcaAutoencoder ae = PcaAutoencoder::load(opt.pca);
    const AnchorSet anchors = AnchorSet::load(opt.anchors);

    SamplerConfig config;
    config.jitter_std = opt.jitter_scale * ae.latent_scale();
    config.max_blend = opt.max_blend;
    if (opt.mode == "slerp")
        config.mode = BlendMode::slerp;
    else if (opt.mode == "lerp")
        config.mode = BlendMode::lerp;
    else if (opt.mode == "random")
        config.mode = BlendMode::random;
    else
        throw std::invalid_argument("balance sample: unknown mode " + opt.mode);

    Rng root(opt.seed);
    Rng rng = root.derive("balance-sample");
    std::vector<PoseRecord> records;
    std::vector<Vec> latents;
    {
        StageTimer timer(manifest, "sample");
        for (int i = 0; i < opt.count; ++i) {
            const TailSample sample = sample_tail(anchors, ae, config, rng);
            PoseRecord rec;
            rec.frame_id = i;
            rec.params.beta = Vec::Zero(0);
            rec.params.theta = sample.theta;
            records.push_back(std::move(rec));
            latents.push_back(ae.encode(sample.theta));
        }
    }
    write_pose_stream(records, opt.output);

    if (!opt.synthesis_report.empty()) {
        StageTimer timer(manifest, "synthesis-report");
        // DIV from two equal re-encoded subsets, FID against the anchor
        // distribution in the same feature space.
        const std::size_t half = latents.size() / 2;
        const std::vector<Vec> sub_a(latents.begin(), latents.begin() + half);
        const std::vector<Vec> sub_b(latents.begin() + half, latents.begin() + 2 * half);
        nlohmann::json j;
        const double div = div_metric(sub_a, sub_b);
        j["div"] = div;
        if (anchors.anchors.size() >= 2) {
            const double fid = fid_metric(anchors.anchors, latents);
            j["fid"] = fid;
            if (div > 0) j["synthesis"] = fid / div;
        }
        write_file_atomic(opt.synthesis_report, j.dump(2));
        manifest.outputs.push_back(opt.synthesis_report);
    }
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

int cmd_balance_relevance(const BalanceRelevanceOptions& opt) {
    RunManifest manifest;
    manifest.command = "balance relevance";
    manifest.inputs = {opt.model, opt.poses, opt.pca};
    manifest.outputs = {opt.output};

    const BodyModel model = load_body_model(opt.model);
    std::vector<std::int64_t> ids;
    const std::vector<Vec> poses = read_theta_dataset(opt.poses, &ids);
    const PcaAutoencoder ae = PcaAutoencoder::load(opt.pca);

    StageTimer timer(manifest, "relevance");
    const std::vector<double> eps =
        reconstruction_errors(model, ae, poses, Vec::Zero(model.shape_dim()));
    RelevanceConfig config;
    config.variant = parse_variant(opt.variant);
    config.sigma = opt.sigma > 0 ? opt.sigma : mean_of(eps);

    std::string out;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        nlohmann::json j;
        j["frame_id"] = ids[i];
        j["epsilon"] = eps[i];
        j["relevance"] = relevance(eps[i], config);
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(opt.output, out);
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

}  // namespace mocap::tool
