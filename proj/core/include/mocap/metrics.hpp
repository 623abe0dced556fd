#pragma once

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mocap/types.hpp"

namespace mocap {

/// Positional error in millimeters, per the source definition: mean over
/// samples of sqrt(mean over joints of the Euclidean distance). Note the
/// square root sits inside the per-sample average, which is not the
/// textbook RMSE; kept verbatim so reported numbers share one definition.
/// Inputs are in meters.
double rmse_mm(const std::vector<Points>& gt, const std::vector<Points>& est);

/// Percentage of keypoints strictly within tau (meters) of ground truth,
/// averaged per sample, then over samples.
double pck_percent(const std::vector<Points>& gt, const std::vector<Points>& est, double tau);

/// Mean geodesic rotation distance in degrees. Throws on non-rotations.
double mae_geodesic_degrees(const std::vector<std::vector<Mat3>>& gt,
                            const std::vector<std::vector<Mat3>>& est);

/// rmse3 = (1 - pck3) * rmse, with pck3 a fraction in [0, 1].
double rmse3_indicator(double rmse, double pck3_fraction);

/// synthesis = fid / div; empty when div is zero.
std::optional<double> synthesis_indicator(double fid, double div);

struct EvalReport {
    double rmse = 0.0;  // mm
    double pck1 = 0.0;  // percent, tau = 10 mm
    double pck3 = 0.0;  // percent, tau = 30 mm
    double pck7 = 0.0;  // percent, tau = 70 mm
    std::optional<double> mae;  // degrees
    std::optional<double> div;
    std::optional<double> fid;
    double rmse3 = 0.0;
    std::optional<double> synthesis;

    void save(const std::string& path) const;
    static EvalReport load(const std::string& path);
};

/// Fills the indicator fields of a report from its metric fields.
void fill_indicators(EvalReport& report);

/// Flat CSV with one row per metric: dataset,mode,metric,value.
std::string report_csv(const std::vector<std::tuple<std::string, std::string, EvalReport>>& rows);

std::vector<std::tuple<std::string, std::string, EvalReport>> parse_report_csv(
    const std::string& csv);

}  // namespace mocap
