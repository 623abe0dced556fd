#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mocap/version.hpp"
#include "tool_util.hpp"

int main(int argc, char** argv) {
    using namespace mocap::tool;

    CLI::App app{"MoCap solving engine: synthesis, corruption, balancing, rendering, "
                 "fitting, evaluation and the simulated sensor pipeline"};
    app.set_version_flag("--version", mocap::kVersion);
    app.require_subcommand(1);

    // model ------------------------------------------------------------
    ModelOptions model_opt;
    auto* model = app.add_subcommand("model", "Write a built-in synthetic body model");
    model->add_option("--layout", model_opt.layout, "53x18 or 56x24")
        ->check(CLI::IsMember({"53x18", "56x24"}));
    model->add_option("--output,-o", model_opt.output, "Model JSON path")->required();

    // synth ------------------------------------------------------------
    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "Synthesize labeled marker frames from poses");
    synth->add_option("--model", synth_opt.model, "Body model JSON")->required();
    synth->add_option("--input,--poses", synth_opt.poses, "Pose stream (jsonl)");
    synth->add_option("--random", synth_opt.random, "Draw N random poses instead");
    synth->add_option("--pose-range", synth_opt.pose_range, "Random pose range, rad");
    synth->add_option("--shape-range", synth_opt.shape_range, "Random shape range");
    synth->add_flag("--random-root", synth_opt.random_root, "Randomize yaw and position");
    synth->add_option("--landmarks", synth_opt.landmarks, "markers | all")
        ->check(CLI::IsMember({"markers", "all"}));
    synth->add_option("--output,-o", synth_opt.output, "Frame stream out")->required();
    synth->add_option("--gt-output", synth_opt.gt_output, "Full landmark frames out");
    synth->add_option("--poses-out", synth_opt.poses_out, "Pose stream out");
    synth->add_option("--seed", synth_opt.seed, "Root seed");
    synth->add_option("--jobs", synth_opt.jobs, "Worker threads (default: cores)");

    // corrupt ----------------------------------------------------------
    CorruptOptions corrupt_opt;
    auto* corrupt = app.add_subcommand("corrupt", "Augment and corrupt marker frames");
    corrupt->add_option("--model", corrupt_opt.model, "Body model JSON")->required();
    corrupt->add_option("--input,-i", corrupt_opt.input, "Frame stream in")->required();
    corrupt->add_option("--poses", corrupt_opt.poses, "Pose stream (enables augmentation)");
    corrupt->add_option("--config", corrupt_opt.config, "Corruption config JSON");
    corrupt->add_option("--output,-o", corrupt_opt.output, "Frame stream out")->required();
    corrupt->add_option("--poses-out", corrupt_opt.poses_out, "Augmented poses out");
    corrupt->add_option("--provenance", corrupt_opt.provenance, "Per-frame provenance jsonl");
    corrupt->add_option("--seed", corrupt_opt.seed, "Root seed (overrides config)");
    corrupt->add_option("--jobs", corrupt_opt.jobs, "Worker threads");

    // balance ----------------------------------------------------------
    auto* balance = app.add_subcommand("balance", "Relevance weighting and tail oversampling");
    balance->require_subcommand(1);

    BalanceAnchorsOptions anchors_opt;
    auto* anchors = balance->add_subcommand("anchors", "Select tail anchor latent codes");
    anchors->add_option("--model", anchors_opt.model)->required();
    anchors->add_option("--poses", anchors_opt.poses, "Pose dataset (jsonl)")->required();
    anchors->add_option("--pca", anchors_opt.pca, "Autoencoder JSON (else fit fresh)");
    anchors->add_option("--latent", anchors_opt.latent, "Latent dim when fitting");
    anchors->add_option("--pca-out", anchors_opt.pca_out, "Store the fitted autoencoder");
    anchors->add_option("--threshold-std", anchors_opt.threshold_std, "Std-dev threshold");
    anchors->add_option("--output,-o", anchors_opt.output, "Anchor set JSON")->required();
    anchors->add_option("--relevance-out", anchors_opt.relevance_out, "Epsilon/relevance dump");
    anchors->add_option("--variant", anchors_opt.variant)
        ->check(CLI::IsMember({"exp1p", "sigmoid", "exp-clamped"}));
    anchors->add_option("--sigma", anchors_opt.sigma, "Relevance scale (0 = mean epsilon)");

    BalanceSampleOptions sample_opt;
    auto* sample = balance->add_subcommand("sample", "Draw tail samples around anchors");
    sample->add_option("--pca", sample_opt.pca)->required();
    sample->add_option("--anchors", sample_opt.anchors)->required();
    sample->add_option("--count,-n", sample_opt.count, "Samples to draw");
    sample->add_option("--mode", sample_opt.mode)
        ->check(CLI::IsMember({"slerp", "lerp", "random"}));
    sample->add_option("--blend-max", sample_opt.max_blend, "Max blend factor B");
    sample->add_option("--jitter-scale", sample_opt.jitter_scale,
                       "Anchor jitter as a fraction of the latent scale");
    sample->add_option("--output,-o", sample_opt.output, "Pose stream out")->required();
    sample->add_option("--synthesis-report", sample_opt.synthesis_report,
                       "div/fid/synthesis JSON out");
    sample->add_option("--seed", sample_opt.seed, "Root seed");

    BalanceRelevanceOptions relevance_opt;
    auto* relevance = balance->add_subcommand("relevance", "Score poses by reconstructability");
    relevance->add_option("--model", relevance_opt.model)->required();
    relevance->add_option("--poses", relevance_opt.poses)->required();
    relevance->add_option("--pca", relevance_opt.pca)->required();
    relevance->add_option("--variant", relevance_opt.variant)
        ->check(CLI::IsMember({"exp1p", "sigmoid", "exp-clamped"}));
    relevance->add_option("--sigma", relevance_opt.sigma, "Scale (0 = mean epsilon)");
    relevance->add_option("--output,-o", relevance_opt.output)->required();

    // render -------------------------------------------------------------
    RenderOptions render_opt;
    auto* render = app.add_subcommand("render", "Orthographic depth maps (and heatmaps)");
    render->add_option("--input,-i", render_opt.input, "Frame stream in")->required();
    render->add_option("--output,-o", render_opt.output_dir, "Output directory")->required();
    render->add_option("--resolution", render_opt.resolution);
    render->add_option("--margin", render_opt.margin);
    render->add_option("--policy", render_opt.policy)
        ->check(CLI::IsMember({"max-extent", "diagonal"}));
    render->add_flag("--heatmaps", render_opt.heatmaps, "Also write per-landmark heatmaps");
    render->add_option("--sigma-px", render_opt.sigma_px, "Heatmap sigma in pixels");
    render->add_option("--seed", render_opt.seed);
    render->add_option("--jobs", render_opt.jobs);

    // fit ------------------------------------------------------------------
    FitOptions fit_opt;
    auto* fit = app.add_subcommand("fit", "Fit body parameters to labeled landmark frames");
    fit->add_option("--model", fit_opt.model)->required();
    fit->add_option("--input,-i", fit_opt.input, "Labeled frame stream")->required();
    fit->add_option("--pca", fit_opt.pca, "Pose prior autoencoder JSON");
    fit->add_flag("--direct-theta", fit_opt.direct_theta, "Optimize theta directly");
    fit->add_option("--mode", fit_opt.mode)
        ->check(CLI::IsMember({"noise-aware", "plain", "barron"}));
    fit->add_option("--targets", fit_opt.targets, "markers | all")
        ->check(CLI::IsMember({"markers", "all"}));
    fit->add_option("--output,-o", fit_opt.output, "Fit results jsonl")->required();
    fit->add_option("--lambda-beta", fit_opt.lambda_beta);
    fit->add_option("--lambda-z", fit_opt.lambda_z);
    fit->add_option("--sigma-init", fit_opt.sigma_init);
    fit->add_flag("--squared-residual", fit_opt.squared_residual,
                  "Square the residual norm in the data term");
    fit->add_flag("--warm-start", fit_opt.warm_start,
                  "Sequence mode: seed each frame with the previous fit");
    fit->add_option("--seed", fit_opt.seed);
    fit->add_option("--jobs", fit_opt.jobs);

    // eval -------------------------------------------------------------------
    EvalOptions eval_opt;
    auto* eval = app.add_subcommand("eval", "Evaluation metrics between gt and estimates");
    eval->add_option("--gt", eval_opt.gt, "Ground-truth frame stream");
    eval->add_option("--est", eval_opt.est, "Estimated frame stream");
    eval->add_option("--model", eval_opt.model, "Body model (pose-based eval)");
    eval->add_option("--gt-poses", eval_opt.gt_poses, "Ground-truth pose stream");
    eval->add_option("--est-fits", eval_opt.est_fits, "Fit results jsonl");
    eval->add_option("--report,-o", eval_opt.report, "Report JSON out")->required();
    eval->add_option("--csv", eval_opt.csv, "Also write a single-run CSV");
    eval->add_option("--dataset", eval_opt.dataset, "Dataset label for the CSV");
    eval->add_option("--run-mode", eval_opt.run_mode, "Mode label for the CSV");

    // report -------------------------------------------------------------------
    ReportOptions report_opt;
    auto* report = app.add_subcommand("report", "Bundle eval reports into a flat CSV");
    report->add_option("--item", report_opt.items, "dataset:mode:report.json (repeatable)")
        ->required();
    report->add_option("--output,-o", report_opt.output, "CSV out")->required();

    // capture ---------------------------------------------------------------
    auto* capture = app.add_subcommand("capture", "Simulated multi-sensor pipeline");
    capture->require_subcommand(1);

    CaptureSimulateOptions sim_opt;
    auto* simulate = capture->add_subcommand("simulate", "Render IR/depth sensor frames");
    simulate->add_option("--rig", sim_opt.rig, "Rig description JSON")->required();
    simulate->add_option("--scene", sim_opt.scene, "Marker frame stream")->required();
    simulate->add_option("--output,-o", sim_opt.output_dir, "Output directory")->required();
    simulate->add_option("--depth-noise", sim_opt.depth_noise, "Depth noise stddev, m");
    simulate->add_option("--marker-radius", sim_opt.marker_radius, "Marker radius, m");
    simulate->add_option("--seed", sim_opt.seed);
    simulate->add_option("--jobs", sim_opt.jobs);

    CaptureExtractOptions extract_opt;
    auto* extract = capture->add_subcommand("extract", "Extract and fuse marker estimates");
    extract->add_option("--rig", extract_opt.rig)->required();
    extract->add_option("--input,-i", extract_opt.input_dir, "Simulated capture dir")
        ->required();
    extract->add_option("--output,-o", extract_opt.output, "Fused frame stream")->required();
    extract->add_option("--observations", extract_opt.observations, "Per-sensor dump jsonl");
    extract->add_option("--threshold", extract_opt.threshold, "IR threshold");
    extract->add_option("--min-area", extract_opt.min_area, "Min blob pixels");
    extract->add_option("--radius", extract_opt.radius, "Fusion cluster radius, m");
    extract->add_option("--seed", extract_opt.seed);
    extract->add_option("--jobs", extract_opt.jobs);

    CaptureCalibrateOptions calib_opt;
    auto* calibrate = capture->add_subcommand("calibrate", "Wand calibration of extrinsics");
    calibrate->add_option("--tracks", calib_opt.tracks, "Wand observations jsonl")->required();
    calibrate->add_option("--rig-init", calib_opt.rig_init, "Rig with intrinsics")->required();
    calibrate->add_option("--output,-o", calib_opt.output, "Calibrated rig JSON")->required();
    calibrate->add_option("--gravity", calib_opt.gravity,
                          "Frame file with the three floor markers");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*model) return cmd_model(model_opt);
        if (*synth) return cmd_synth(synth_opt);
        if (*corrupt) return cmd_corrupt(corrupt_opt);
        if (*anchors) return cmd_balance_anchors(anchors_opt);
        if (*sample) return cmd_balance_sample(sample_opt);
        if (*relevance) return cmd_balance_relevance(relevance_opt);
        if (*render) return cmd_render(render_opt);
        if (*fit) return cmd_fit(fit_opt);
        if (*eval) return cmd_eval(eval_opt);
        if (*report) return cmd_report(report_opt);
        if (*simulate) return cmd_capture_simulate(sim_opt);
        if (*extract) return cmd_capture_extract(extract_opt);
        if (*calibrate) return cmd_capture_calibrate(calib_opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
