#pragma once

#include <json.hpp>

#include "mocap/types.hpp"

namespace mocap::detail {

using nlohmann::json;

inline json to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const Mat& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Vec vec_from(const json& a) {
    Vec v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

inline Vec3 vec3_from(const json& a) {
    if (a.size() != 3) throw std::invalid_argument("expected 3-vector");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

inline Mat mat_from(const json& a) {
    const int rows = static_cast<int>(a.size());
    if (rows == 0) return Mat(0, 0);
    const int cols = static_cast<int>(a[0].size());
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(a[r].size()) != cols)
            throw std::invalid_argument("ragged matrix in file");
        for (int c = 0; c < cols; ++c) m(r, c) = a[r][c].get<double>();
    }
    return m;
}

}  // namespace mocap::detail
