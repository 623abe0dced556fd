#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Geometry>

#include "mocap/geometry.hpp"
#include "mocap/metrics.hpp"
#include "mocap/rng.hpp"

using namespace mocap;

namespace {

std::vector<Points> random_sets(int n, int joints, Rng& rng) {
    std::vector<Points> sets;
    for (int i = 0; i < n; ++i) {
        Points p(joints, 3);
        for (int j = 0; j < joints; ++j) p.row(j) = rng.normal3().transpose();
        sets.push_back(std::move(p));
    }
    return sets;
}

}  // namespace

TEST_CASE("rmse identities and the single-offset value") {
    Rng rng(61);
    const auto gt = random_sets(6, 5, rng);
    CHECK(rmse_mm(gt, gt) == 0.0);

    // One sample, one joint, 30 mm offset: the formula gives sqrt(30).
    Points a(1, 3), b(1, 3);
    a << 0, 0, 0;
    b << 0.03, 0, 0;
    CHECK(rmse_mm({a}, {b}) == doctest::Approx(std::sqrt(30.0)).epsilon(1e-12));

    // Permuting the sample order changes nothing.
    auto est = gt;
    for (auto& p : est) p.array() += 0.01;
    std::vector<int> order = {3, 1, 4, 0, 5, 2};
    std::vector<Points> gt_perm, est_perm;
    for (int i : order) {
        gt_perm.push_back(gt[i]);
        est_perm.push_back(est[i]);
    }
    CHECK(rmse_mm(gt, est) == doctest::Approx(rmse_mm(gt_perm, est_perm)).epsilon(1e-12));

    CHECK_THROWS_AS(rmse_mm(gt, random_sets(5, 5, rng)), std::invalid_argument);
}

TEST_CASE("pck boundary is strict and fractions average correctly") {
    Points gt(4, 3);
    gt.setZero();
    CHECK(pck_percent({gt}, {gt}, 0.03) == doctest::Approx(100.0));

    // All joints exactly at tau: strictly-within fails.
    Points at_tau = gt;
    at_tau.col(0).array() += 0.03;
    CHECK(pck_percent({gt}, {at_tau}, 0.03) == doctest::Approx(0.0));

    // Half at zero, half at 2 tau.
    Points half = gt;
    half.col(0).segment(0, 2).array() += 0.06;
    CHECK(pck_percent({gt}, {half}, 0.03) == doctest::Approx(50.0));
}

TEST_CASE("pck is monotone in tau") {
    Rng rng(62);
    const auto gt = random_sets(8, 6, rng);
    auto est = gt;
    for (auto& p : est)
        for (int j = 0; j < p.rows(); ++j)
            p.row(j) += (rng.normal3() * 0.02).transpose();
    const double p1 = pck_percent(gt, est, 0.010);
    const double p3 = pck_percent(gt, est, 0.030);
    const double p7 = pck_percent(gt, est, 0.070);
    CHECK(p1 <= p3);
    CHECK(p3 <= p7);
}

TEST_CASE("geodesic mae on identical, known-angle and random pairs") {
    Rng rng(63);
    std::vector<Mat3> id_row(3, Mat3::Identity());
    CHECK(mae_geodesic_degrees({id_row}, {id_row}) == doctest::Approx(0.0));

    // 90 degrees about one axis.
    std::vector<Mat3> quarter = {rodrigues(Vec3(M_PI / 2, 0, 0))};
    CHECK(mae_geodesic_degrees({{Mat3::Identity()}}, {quarter}) ==
          doctest::Approx(90.0).epsilon(1e-12));

    // Exactness across the angle range.
    for (double phi : {0.01, 0.5, 1.5, 3.0, M_PI - 1e-9}) {
        const Mat3 base = rodrigues(rng.normal3());
        const Mat3 rotated = base * rodrigues(Vec3(0, 0, phi));
        const double mae = mae_geodesic_degrees({{base}}, {{rotated}});
        CHECK(mae == doctest::Approx(phi * 180.0 / M_PI).epsilon(1e-9));
    }

    // Quaternion double-cover oracle on random pairs.
    for (int i = 0; i < 30; ++i) {
        const Mat3 a = rodrigues(rng.normal3());
        const Mat3 b = rodrigues(rng.normal3());
        const Eigen::Quaterniond qa(a), qb(b);
        const double dot = std::clamp(std::abs(qa.dot(qb)), 0.0, 1.0);
        const double expected = 2.0 * std::acos(dot) * 180.0 / M_PI;
        CHECK(mae_geodesic_degrees({{a}}, {{b}}) == doctest::Approx(expected).epsilon(1e-9));
    }

    std::vector<Mat3> bad = {2.0 * Mat3::Identity()};
    CHECK_THROWS_AS(mae_geodesic_degrees({bad}, {bad}), std::invalid_argument);
}

TEST_CASE("indicator formulas") {
    CHECK(rmse3_indicator(25.0, 1.0) == doctest::Approx(0.0));
    CHECK(rmse3_indicator(20.0, 0.5) == doctest::Approx(10.0));
    CHECK_THROWS_AS(rmse3_indicator(1.0, 1.5), std::invalid_argument);

    CHECK(*synthesis_indicator(8.0, 16.0) == doctest::Approx(0.5));
    CHECK_FALSE(synthesis_indicator(8.0, 0.0).has_value());
}

TEST_CASE("report json and csv round trips") {
    EvalReport r;
    r.rmse = 21.5;
    r.pck1 = 31.0;
    r.pck3 = 88.0;
    r.pck7 = 97.5;
    r.mae = 2.75;
    r.div = 12.0;
    r.fid = 6.0;
    fill_indicators(r);
    CHECK(r.rmse3 == doctest::Approx((1.0 - 0.88) * 21.5));
    CHECK(*r.synthesis == doctest::Approx(0.5));

    const std::string path = "/tmp/mocap_test_report.json";
    r.save(path);
    const EvalReport back = EvalReport::load(path);
    CHECK(back.rmse == r.rmse);
    CHECK(back.pck3 == r.pck3);
    CHECK(*back.mae == *r.mae);
    CHECK(*back.synthesis == *r.synthesis);
    std::remove(path.c_str());

    const auto rows = std::vector<std::tuple<std::string, std::string, EvalReport>>{
        {"fixture", "noise-aware", r}};
    const std::string csv = report_csv(rows);
    const auto parsed = parse_report_csv(csv);
    REQUIRE(parsed.size() == 1);
    CHECK(std::get<0>(parsed[0]) == "fixture");
    CHECK(std::get<1>(parsed[0]) == "noise-aware");
    const EvalReport& p = std::get<2>(parsed[0]);
    CHECK(p.rmse == r.rmse);
    CHECK(p.pck1 == r.pck1);
    CHECK(p.pck7 == r.pck7);
    CHECK(*p.fid == *r.fid);
    CHECK(p.rmse3 == r.rmse3);
}
