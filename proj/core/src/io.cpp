#include "mocap/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json_util.hpp"
#include "mocap/geometry.hpp"

namespace mocap {

using detail::json;

namespace {

json root_to_json(const RigidTransform& t) {
    return json{{"axis_angle", detail::to_json(axis_angle_from_rotation(t.rotation))},
                {"translation", detail::to_json(t.translation)}};
}

RigidTransform root_from_json(const json& j) {
    RigidTransform t;
    t.rotation = rodrigues(detail::vec3_from(j.at("axis_angle")));
    t.translation = detail::vec3_from(j.at("translation"));
    return t;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

// ---- body model ---------------------------------------------------------------

BodyModel load_body_model(const std::string& path) {
    const json j = load_json_file(path);
    BodyModel m;
    m.template_vertices = detail::mat_from(j.at("template"));
    {
        const Mat f = detail::mat_from(j.at("faces"));
        m.faces.resize(f.rows(), 3);
        for (int r = 0; r < f.rows(); ++r)
            for (int c = 0; c < 3; ++c) m.faces(r, c) = static_cast<int>(f(r, c));
    }
    for (const auto& bs : j.at("blendshapes")) m.shape_blendshapes.push_back(detail::mat_from(bs));
    m.skinning_weights = detail::mat_from(j.at("weights"));
    m.joint_regressor = detail::mat_from(j.at("joint_regressor"));
    for (const auto& p : j.at("parents")) m.parents.push_back(p.get<int>());
    if (j.contains("joint_names"))
        for (const auto& n : j.at("joint_names")) m.joint_names.push_back(n.get<std::string>());
    m.marker_radius = j.at("marker_radius").get<double>();

    const auto& lms = j.at("landmarks");
    const int l_count = static_cast<int>(lms.size());
    m.landmark_bary_source.assign(l_count, std::nullopt);
    std::vector<Eigen::Triplet<double>> triplets;
    int row = 0;
    for (const auto& lm : lms) {
        m.landmark_labels.push_back(lm.at("name").get<std::string>());
        const std::string kind = lm.at("kind").get<std::string>();
        if (kind != "marker" && kind != "joint")
            throw std::invalid_argument("model: unknown landmark kind " + kind);
        m.landmark_kinds.push_back(kind == "marker" ? LandmarkKind::marker : LandmarkKind::joint);
        m.landmark_extrude.push_back(lm.at("extrude").get<bool>());
        if (lm.contains("face")) {
            const int face = lm.at("face").get<int>();
            const Vec3 bary = detail::vec3_from(lm.at("bary"));
            if (face < 0 || face >= m.faces.rows())
                throw std::invalid_argument("model: landmark face out of range");
            for (int e = 0; e < 3; ++e)
                if (bary[e] > 1e-12) triplets.emplace_back(row, m.faces(face, e), bary[e]);
            m.landmark_bary_source[row] = std::make_pair(face, bary);
        } else {
            for (const auto& vw : lm.at("vertex_weights"))
                triplets.emplace_back(row, vw[0].get<int>(), vw[1].get<double>());
        }
        ++row;
    }
    m.landmark_regressor.resize(l_count, m.vertex_count());
    m.landmark_regressor.setFromTriplets(triplets.begin(), triplets.end());

    m.validate();
    return m;
}

void save_body_model(const BodyModel& m, const std::string& path) {
    json j;
    j["template"] = detail::to_json(Mat(m.template_vertices));
    {
        json f = json::array();
        for (int r = 0; r < m.faces.rows(); ++r)
            f.push_back({m.faces(r, 0), m.faces(r, 1), m.faces(r, 2)});
        j["faces"] = std::move(f);
    }
    {
        json bs = json::array();
        for (const auto& b : m.shape_blendshapes) bs.push_back(detail::to_json(Mat(b)));
        j["blendshapes"] = std::move(bs);
    }
    j["weights"] = detail::to_json(m.skinning_weights);
    j["joint_regressor"] = detail::to_json(m.joint_regressor);
    j["parents"] = m.parents;
    if (!m.joint_names.empty()) j["joint_names"] = m.joint_names;
    j["marker_radius"] = m.marker_radius;

    json lms = json::array();
    for (int i = 0; i < m.landmark_count(); ++i) {
        json lm;
        lm["name"] = m.landmark_labels[i];
        lm["kind"] = m.landmark_kinds[i] == LandmarkKind::marker ? "marker" : "joint";
        lm["extrude"] = static_cast<bool>(m.landmark_extrude[i]);
        if (!m.landmark_bary_source.empty() && m.landmark_bary_source[i]) {
            lm["face"] = m.landmark_bary_source[i]->first;
            lm["bary"] = detail::to_json(m.landmark_bary_source[i]->second);
        } else {
            json vw = json::array();
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
                     m.landmark_regressor, i);
                 it; ++it)
                vw.push_back({it.col(), it.value()});
            lm["vertex_weights"] = std::move(vw);
        }
        lms.push_back(std::move(lm));
    }
    j["landmarks"] = std::move(lms);

    write_file_atomic(path, j.dump(1));
}

// ---- frame stream ---------------------------------------------------------------

MarkerFrame frame_from_json_line(const std::string& line) {
    const json j = json::parse(line);
    MarkerFrame f;
    f.frame_id = j.at("frame_id").get<std::int64_t>();
    for (const auto& p : j.at("points")) f.points.push_back(detail::vec3_from(p));
    if (j.contains("labels")) {
        for (const auto& l : j.at("labels"))
            f.labels.push_back(l.is_null() ? std::optional<std::string>{}
                                           : std::optional<std::string>{l.get<std::string>()});
    } else {
        f.labels.assign(f.points.size(), std::nullopt);
    }
    if (f.labels.size() != f.points.size())
        throw std::invalid_argument("frame: labels/points length mismatch");
    return f;
}

std::string frame_to_json_line(const MarkerFrame& f) {
    json j;
    j["frame_id"] = f.frame_id;
    json pts = json::array();
    for (const auto& p : f.points) pts.push_back(detail::to_json(p));
    j["points"] = std::move(pts);
    json labels = json::array();
    for (const auto& l : f.labels) {
        if (l)
            labels.push_back(*l);
        else
            labels.push_back(nullptr);
    }
    j["labels"] = std::move(labels);
    return j.dump();
}

std::vector<MarkerFrame> read_frame_stream(const std::string& path) {
    std::vector<MarkerFrame> frames;
    for (const auto& line : read_lines(path)) frames.push_back(frame_from_json_line(line));
    return frames;
}

void write_frame_stream(const std::vector<MarkerFrame>& frames, const std::string& path) {
    std::string out;
    for (const auto& f : frames) {
        out += frame_to_json_line(f);
        out += '\n';
    }
    write_file_atomic(path, out);
}

// ---- pose stream ----------------------------------------------------------------

std::vector<PoseRecord> read_pose_stream(const std::string& path) {
    std::vector<PoseRecord> poses;
    for (const auto& line : read_lines(path)) {
        const json j = json::parse(line);
        PoseRecord r;
        r.frame_id = j.at("frame_id").get<std::int64_t>();
        r.params.beta = detail::vec_from(j.at("beta"));
        r.params.theta = detail::vec_from(j.at("theta"));
        r.params.root = root_from_json(j.at("root"));
        poses.push_back(std::move(r));
    }
    return poses;
}

void write_pose_stream(const std::vector<PoseRecord>& poses, const std::string& path) {
    std::string out;
    for (const auto& r : poses) {
        json j;
        j["frame_id"] = r.frame_id;
        j["beta"] = detail::to_json(r.params.beta);
        j["theta"] = detail::to_json(r.params.theta);
        j["root"] = root_to_json(r.params.root);
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

// ---- fit results -------------------------------------------------------------------

std::vector<FitRecord> read_fit_stream(const std::string& path) {
    std::vector<FitRecord> fits;
    for (const auto& line : read_lines(path)) {
        const json j = json::parse(line);
        FitRecord r;
        r.frame_id = j.at("frame_id").get<std::int64_t>();
        r.params.beta = detail::vec_from(j.at("beta"));
        r.params.theta = detail::vec_from(j.at("theta"));
        r.params.root = root_from_json(j.at("root"));
        if (j.contains("z")) r.z = detail::vec_from(j.at("z"));
        r.sigma = detail::vec_from(j.at("sigma"));
        r.energy = j.at("energy").get<double>();
        r.converged = j.at("converged").get<bool>();
        if (j.contains("iterations"))
            for (const auto& n : j.at("iterations")) r.stage_iterations.push_back(n.get<int>());
        fits.push_back(std::move(r));
    }
    return fits;
}

void write_fit_stream(const std::vector<FitRecord>& fits, const std::string& path) {
    std::string out;
    for (const auto& r : fits) {
        json j;
        j["frame_id"] = r.frame_id;
        j["beta"] = detail::to_json(r.params.beta);
        j["theta"] = detail::to_json(r.params.theta);
        j["root"] = root_to_json(r.params.root);
        if (r.z.size() > 0) j["z"] = detail::to_json(r.z);
        j["sigma"] = detail::to_json(r.sigma);
        j["energy"] = r.energy;
        j["converged"] = r.converged;
        j["iterations"] = r.stage_iterations;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

// ---- binary grid container -----------------------------------------------------------

namespace {
constexpr char kGridMagic[4] = {'M', 'G', 'R', 'D'};

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(b, 4);
}

std::uint32_t get_u32(const char* p) {
    return static_cast<std::uint8_t>(p[0]) | (static_cast<std::uint8_t>(p[1]) << 8) |
           (static_cast<std::uint8_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
}
}  // namespace

void write_grid(const GridFile& grid, const std::string& path) {
    if (grid.channels.empty()) throw std::invalid_argument("write_grid: no channels");
    const int h = static_cast<int>(grid.channels[0].rows());
    const int w = static_cast<int>(grid.channels[0].cols());
    for (const auto& c : grid.channels)
        if (c.rows() != h || c.cols() != w)
            throw std::invalid_argument("write_grid: channel shape mismatch");

    std::string out;
    out.append(kGridMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(grid.view));
    put_u32(out, static_cast<std::uint32_t>(w));
    put_u32(out, static_cast<std::uint32_t>(h));
    put_u32(out, static_cast<std::uint32_t>(grid.channels.size()));
    for (const auto& c : grid.channels) {
        for (int r = 0; r < h; ++r) {
            for (int col = 0; col < w; ++col) {
                const float f = static_cast<float>(c(r, col));
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(out, bits);
            }
        }
    }
    write_file_atomic(path, out);
}

GridFile read_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 20 || std::memcmp(data.data(), kGridMagic, 4) != 0)
        throw std::runtime_error("not a grid container: " + path);
    GridFile grid;
    grid.view = static_cast<GridView>(get_u32(data.data() + 4));
    const std::uint32_t w = get_u32(data.data() + 8);
    const std::uint32_t h = get_u32(data.data() + 12);
    const std::uint32_t channels = get_u32(data.data() + 16);
    const std::size_t expected = 20 + std::size_t(4) * w * h * channels;
    if (data.size() != expected) throw std::runtime_error("truncated grid container: " + path);
    const char* p = data.data() + 20;
    for (std::uint32_t c = 0; c < channels; ++c) {
        Mat m(h, w);
        for (std::uint32_t r = 0; r < h; ++r) {
            for (std::uint32_t col = 0; col < w; ++col) {
                const std::uint32_t bits = get_u32(p);
                p += 4;
                float f;
                std::memcpy(&f, &bits, 4);
                m(r, col) = f;
            }
        }
        grid.channels.push_back(std::move(m));
    }
    return grid;
}

}  // namespace mocap
