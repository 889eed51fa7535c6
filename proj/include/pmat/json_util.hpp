#pragma once

#include <Eigen/Core>
#include <json.hpp>

namespace nlohmann {

template <>
struct adl_serializer<Eigen::Vector2d> {
  static void to_json(json& j, const Eigen::Vector2d& v) { j = json::array({v.x(), v.y()}); }
  static void from_json(const json& j, Eigen::Vector2d& v) {
    if (!j.is_array() || j.size() != 2) {
      throw json::type_error::create(302, "expected [x, y] pair", &j);
    }
    v = Eigen::Vector2d(j[0].get<double>(), j[1].get<double>());
  }
};

}  // namespace nlohmann
