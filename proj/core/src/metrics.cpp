#include "mocap/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "mocap/geometry.hpp"
#include "mocap/io.hpp"

namespace mocap {

using detail::json;

namespace {

void check_shapes(const std::vector<Points>& gt, const std::vector<Points>& est) {
    if (gt.empty() || gt.size() != est.size())
        throw std::invalid_argument("metrics: sample counts differ or are empty");
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt[i].rows() != est[i].rows() || gt[i].rows() == 0)
            throw std::invalid_argument("metrics: joint counts differ or are empty");
}

}  // namespace

double rmse_mm(const std::vector<Points>& gt, const std::vector<Points>& est) {
    check_shapes(gt, est);
    double acc = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double mean_dist_mm = 1000.0 * (gt[i] - est[i]).rowwise().norm().mean();
        acc += std::sqrt(mean_dist_mm);
    }
    return acc / static_cast<double>(gt.size());
}

double pck_percent(const std::vector<Points>& gt, const std::vector<Points>& est, double tau) {
    check_shapes(gt, est);
    if (tau <= 0) throw std::invalid_argument("pck: tau must be positive");
    double acc = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto dists = (gt[i] - est[i]).rowwise().norm();
        double hits = 0;
        for (int j = 0; j < dists.size(); ++j)
            if (dists[j] < tau) hits += 1.0;
        acc += hits / static_cast<double>(dists.size());
    }
    return 100.0 * acc / static_cast<double>(gt.size());
}

double mae_geodesic_degrees(const std::vector<std::vector<Mat3>>& gt,
                            const std::vector<std::vector<Mat3>>& est) {
    if (gt.empty() || gt.size() != est.size())
        throw std::invalid_argument("mae: sample counts differ or are empty");
    double acc = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i].empty() || gt[i].size() != est[i].size())
            throw std::invalid_argument("mae: joint counts differ or are empty");
        double sample = 0;
        for (std::size_t j = 0; j < gt[i].size(); ++j) {
            if (!is_rotation(gt[i][j], 1e-6) || !is_rotation(est[i][j], 1e-6))
                throw std::invalid_argument("mae: input is not a rotation");
            sample += rotation_geodesic(gt[i][j], est[i][j]);
        }
        acc += sample / static_cast<double>(gt[i].size());
    }
    return (acc / static_cast<double>(gt.size())) * 180.0 / M_PI;
}

double rmse3_indicator(double rmse, double pck3_fraction) {
    if (pck3_fraction < 0.0 || pck3_fraction > 1.0)
        throw std::invalid_argument("rmse3: pck3 must be a fraction in [0,1]");
    return (1.0 - pck3_fraction) * rmse;
}

std::optional<double> synthesis_indicator(double fid, double div) {
    if (div == 0.0) return std::nullopt;
    return fid / div;
}

void fill_indicators(EvalReport& report) {
    report.rmse3 = rmse3_indicator(report.rmse, report.pck3 / 100.0);
    if (report.fid && report.div)
        report.synthesis = synthesis_indicator(*report.fid, *report.div);
    else
        report.synthesis.reset();
}

void EvalReport::save(const std::string& path) const {
    json j;
    j["rmse"] = rmse;
    j["pck1"] = pck1;
    j["pck3"] = pck3;
    j["pck7"] = pck7;
    j["rmse3"] = rmse3;
    if (mae) j["mae"] = *mae;
    if (div) j["div"] = *div;
    if (fid) j["fid"] = *fid;
    if (synthesis) j["synthesis"] = *synthesis;
    write_file_atomic(path, j.dump(2));
}

EvalReport EvalReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    EvalReport r;
    r.rmse = j.at("rmse").get<double>();
    r.pck1 = j.at("pck1").get<double>();
    r.pck3 = j.at("pck3").get<double>();
    r.pck7 = j.at("pck7").get<double>();
    r.rmse3 = j.at("rmse3").get<double>();
    if (j.contains("mae")) r.mae = j.at("mae").get<double>();
    if (j.contains("div")) r.div = j.at("div").get<double>();
    if (j.contains("fid")) r.fid = j.at("fid").get<double>();
    if (j.contains("synthesis")) r.synthesis = j.at("synthesis").get<double>();
    return r;
}

namespace {

std::string format_value(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

std::string report_csv(const std::vector<std::tuple<std::string, std::string, EvalReport>>& rows) {
    std::string out = "dataset,mode,metric,value\n";
    for (const auto& [dataset, mode, r] : rows) {
        auto emit = [&](const char* metric, double value) {
            out += dataset + "," + mode + "," + metric + "," + format_value(value) + "\n";
        };
        emit("rmse", r.rmse);
        emit("pck1", r.pck1);
        emit("pck3", r.pck3);
        emit("pck7", r.pck7);
        emit("rmse3", r.rmse3);
        if (r.mae) emit("mae", *r.mae);
        if (r.div) emit("div", *r.div);
        if (r.fid) emit("fid", *r.fid);
        if (r.synthesis) emit("synthesis", *r.synthesis);
    }
    return out;
}

std::vector<std::tuple<std::string, std::string, EvalReport>> parse_report_csv(
    const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "dataset,mode,metric,value")
        throw std::invalid_argument("report csv: bad header");

    std::vector<std::tuple<std::string, std::string, EvalReport>> rows;
    auto find_row = [&](const std::string& dataset, const std::string& mode) -> EvalReport& {
        for (auto& [d, m, r] : rows)
            if (d == dataset && m == mode) return r;
        rows.emplace_back(dataset, mode, EvalReport{});
        return std::get<2>(rows.back());
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string dataset, mode, metric, value;
        if (!std::getline(ls, dataset, ',') || !std::getline(ls, mode, ',') ||
            !std::getline(ls, metric, ',') || !std::getline(ls, value))
            throw std::invalid_argument("report csv: bad row: " + line);
        EvalReport& r = find_row(dataset, mode);
        const double v = std::stod(value);
        if (metric == "rmse")
            r.rmse = v;
        else if (metric == "pck1")
            r.pck1 = v;
        else if (metric == "pck3")
            r.pck3 = v;
        else if (metric == "pck7")
            r.pck7 = v;
        else if (metric == "rmse3")
            r.rmse3 = v;
        else if (metric == "mae")
            r.mae = v;
        else if (metric == "div")
            r.div = v;
        else if (metric == "fid")
            r.fid = v;
        else if (metric == "synthesis")
            r.synthesis = v;
        else
            throw std::invalid_argument("report csv: unknown metric " + metric);
    }
    return rows;
}

}  // namespace mocap
