#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "commands.hpp"
#include "mocap/capture.hpp"
#include "mocap/io.hpp"
#include "tool_util.hpp"

namespace mocap::tool {

namespace {

std::string sim_file(const std::string& dir, std::int64_t frame_id, int sensor_id) {
    return dir + "/capture_f" + std::to_string(frame_id) + "_s" + std::to_string(sensor_id) +
           ".mgrd";
}

}  // namespace

int cmd_capture_simulate(const CaptureSimulateOptions& opt) {
    RunManifest manifest;
    manifest.command = "capture simulate";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.rig, opt.scene};
    manifest.outputs = {opt.output_dir};

    const std::vector<Sensor> rig = load_rig(opt.rig);
    const std::vector<MarkerFrame> frames = read_frame_stream(opt.scene);
    std::filesystem::create_directories(opt.output_dir);

    SensorSimConfig sim;
    sim.depth_noise = opt.depth_noise;
    sim.marker_radius = opt.marker_radius;

    const Rng root(opt.seed);
    {
        StageTimer timer(manifest, "simulate");
        const int jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
        parallel_for(static_cast<int>(frames.size()), jobs, [&](int i) {
            for (const auto& sensor : rig) {
                Rng rng = root.derive("capture-sim", frames[i].frame_id)
                              .derive("sensor-" + std::to_string(sensor.id));
                const SensorFrame sf = simulate_sensor(frames[i], sensor, sim, rng);
                GridFile grid;
                grid.view = GridView::none;
                grid.channels = {sf.ir, sf.depth};
                write_grid(grid, sim_file(opt.output_dir, frames[i].frame_id, sensor.id));
            }
        });
    }

    nlohmann::json index;
    index["frames"] = nlohmann::json::array();
    for (const auto& f : frames) index["frames"].push_back(f.frame_id);
    index["sensors"] = nlohmann::json::array();
    for (const auto& s : rig) index["sensors"].push_back(s.id);
    write_file_atomic(opt.output_dir + "/index.json", index.dump(2));
    manifest.write(RunManifest::default_path(opt.output_dir + "/capture"));
    return 0;
}

int cmd_capture_extract(const CaptureExtractOptions& opt) {
    RunManifest manifest;
    manifest.command = "capture extract";
    manifest.seed = opt.seed;
    manifest.inputs = {opt.rig, opt.input_dir};
    manifest.outputs = {opt.output};

    const std::vector<Sensor> rig = load_rig(opt.rig);
    std::map<int, Sensor> sensors;
    for (const auto& s : rig) sensors[s.id] = s;

    nlohmann::json index;
    {
        std::ifstream in(opt.input_dir + "/index.json");
        if (!in) throw std::runtime_error("capture extract: missing index.json in input dir");
        in >> index;
    }

    std::vector<std::int64_t> frame_ids;
    for (const auto& f : index.at("frames")) frame_ids.push_back(f.get<std::int64_t>());

    std::vector<MarkerFrame> fused(frame_ids.size());
    std::vector<std::string> observation_lines(frame_ids.size());
    {
        StageTimer timer(manifest, "extract");
        const int jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
        parallel_for(static_cast<int>(frame_ids.size()), jobs, [&](int i) {
            std::vector<MarkerObservation> all;
            for (const auto& sid : index.at("sensors")) {
                const Sensor& sensor = sensors.at(sid.get<int>());
                const GridFile grid =
                    read_grid(sim_file(opt.input_dir, frame_ids[i], sensor.id));
                if (grid.channels.size() != 2)
                    throw std::runtime_error("capture extract: expected ir+depth channels");
                SensorFrame sf;
                sf.ir = grid.channels[0];
                sf.depth = grid.channels[1];
                for (const auto& blob : extract_blobs(sf.ir, opt.threshold, opt.min_area)) {
                    const auto obs = blob_to_marker(sf, sensor, blob);
                    if (obs) all.push_back(*obs);
                }
            }
            fused[i] = fuse_and_cluster(all, opt.radius);
            fused[i].frame_id = frame_ids[i];

            nlohmann::json j;
            j["frame_id"] = frame_ids[i];
            nlohmann::json obs_list = nlohmann::json::array();
            for (const auto& o : all)
                obs_list.push_back({{"sensor", o.sensor_id},
                                    {"support", o.support},
                                    {"point", {o.position.x(), o.position.y(), o.position.z()}}});
            j["observations"] = std::move(obs_list);
            observation_lines[i] = j.dump();
        });
    }
    write_frame_stream(fused, opt.output);
    if (!opt.observations.empty()) {
        std::string out;
        for (const auto& line : observation_lines) {
            out += line;
            out += '\n';
        }
        write_file_atomic(opt.observations, out);
        manifest.outputs.push_back(opt.observations);
    }
    manifest.write(RunManifest::default_path(opt.output));
    return 0;
}

int cmd_capture_calibrate(const CaptureCalibrateOptions& opt) {
    RunManifest manifest;
    manifest.command = "capture calibrate";
    manifest.inputs = {opt.tracks, opt.rig_init};
    manifest.outputs = {opt.output};

    std::vector<Sensor> rig = load_rig(opt.rig_init);
    std::map<int, std::size_t> rig_index;
    for (std::size_t i = 0; i < rig.size(); ++i) rig_index[rig[i].id] = i;

    // Wand observation stream: {"t": ..., "sensor": ..., "point": [x,y,z]}.
    std::map<int, WandTrack> tracks_by_sensor;
    {
        std::ifstream in(opt.tracks);
        if (!in) throw std::runtime_error("cannot open " + opt.tracks);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            const int sensor = j.at("sensor").get<int>();
            WandTrack& track = tracks_by_sensor[sensor];
            track.sensor_id = sensor;
            track.samples[j.at("t").get<std::int64_t>()] =
                Vec3(j.at("point")[0].get<double>(), j.at("point")[1].get<double>(),
                     j.at("point")[2].get<double>());
        }
    }
    std::vector<WandTrack> tracks;
    for (const auto& s : rig) {
        const auto it = tracks_by_sensor.find(s.id);
        if (it == tracks_by_sensor.end())
            throw std::invalid_argument("calibrate: no wand track for sensor " +
                                        std::to_string(s.id));
        tracks.push_back(it->second);
    }

    CalibrationResult result;
    {
        StageTimer timer(manifest, "calibrate");
        result = calibrate_wand(tracks);
    }
    for (std::size_t i = 0; i < rig.size(); ++i) rig[i].extrinsics = result.extrinsics[i];

    if (!opt.gravity.empty()) {
        StageTimer timer(manifest, "gravity");
        manifest.inputs.push_back(opt.gravity);
        const std::vector<MarkerFrame> frames = read_frame_stream(opt.gravity);
        if (frames.empty() || frames[0].size() != 3)
            throw std::invalid_argument("calibrate: gravity file must hold one 3-marker frame");
        const RigidTransform align =
            gravity_align(frames[0].points[0], frames[0].points[1], frames[0].points[2]);
        for (auto& s : rig) s.extrinsics = align.compose(s.extrinsics);
    }

    save_rig(rig, opt.output);
    manifest.write(RunManifest::default_path(opt.output));
    log_info("calibrate: residual " + std::to_string(result.residual) + " m");
    return 0;
}

}  // namespace mocap::tool
