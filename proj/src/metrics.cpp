#include "pmat/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <cmath>
#include <regex>
#include <set>

#include "pmat/error.hpp"

namespace pmat {

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

int orientation(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({1.0, (b - a).norm(), (c - a).norm()});
  if (std::abs(v) <= 1e-12 * scale * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  return orientation(a, b, p) == 0 && p.x() >= std::min(a.x(), b.x()) - 1e-12 &&
         p.x() <= std::max(a.x(), b.x()) + 1e-12 && p.y() >= std::min(a.y(), b.y()) - 1e-12 &&
         p.y() <= std::max(a.y(), b.y()) + 1e-12;
}

bool segments_touch(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                    const Eigen::Vector2d& d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  return on_segment(a, b, c) || on_segment(a, b, d) || on_segment(c, d, a) || on_segment(c, d, b);
}

// Interiors cross (not merely touching at endpoints or along a shared edge).
bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                    const Eigen::Vector2d& d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

bool inside_or_on(const Polygon& poly, const Eigen::Vector2d& p) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (on_segment(poly[i], poly[(i + 1) % poly.size()], p)) return true;
  }
  return point_in_polygon(poly, p);
}

bool contains_polygon(const Polygon& outer, const Polygon& inner) {
  for (const auto& v : inner) {
    if (!inside_or_on(outer, v)) return false;
  }
  for (std::size_t i = 0; i < inner.size(); ++i) {
    for (std::size_t j = 0; j < outer.size(); ++j) {
      if (segments_cross(inner[i], inner[(i + 1) % inner.size()], outer[j], outer[(j + 1) % outer.size()])) {
        return false;
      }
    }
  }
  return true;
}

bool polygons_disjoint(const Polygon& a, const Polygon& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (segments_touch(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) return false;
    }
  }
  return !point_in_polygon(a, b.front()) && !point_in_polygon(b, a.front());
}

const std::regex kCallusLabel("callus-[1-9][0-9]*");

bool is_known_label(const std::string& l) {
  static const std::set<std::string> fixed{"foot-L", "foot-R", "heel-L", "heel-R", "metatarsal-L", "metatarsal-R"};
  return fixed.contains(l) || std::regex_match(l, kCallusLabel);
}

}  // namespace

bool point_in_polygon(const Polygon& poly, const Eigen::Vector2d& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[i] - poly[(i + 1) % n]).norm() == 0.0) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& c = poly[j];
      const auto& d = poly[(j + 1) % n];
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) {
        // Shared vertex is fine, folding back along the same line is not.
        const auto& shared = (j == i + 1) ? b : a;
        const auto& p = (j == i + 1) ? a : b;
        const auto& q = (j == i + 1) ? d : c;
        if (orientation(p, shared, q) == 0 && (p - shared).dot(q - shared) > 0) return false;
        continue;
      }
      if (segments_touch(a, b, c, d)) return false;
    }
  }
  return std::abs(signed_area(poly)) > 0.0;
}

double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

const Region* RegionSet::find(const std::string& label) const {
  for (const auto& r : regions) {
    if (r.label == label) return &r;
  }
  return nullptr;
}

std::optional<std::string> RegionSet::foot_of(const Region& region) const {
  for (const char* side : {"L", "R"}) {
    const Region* foot = find(std::string("foot-") + side);
    if (foot && foot != &region && is_simple(foot->polygon) && contains_polygon(foot->polygon, region.polygon)) {
      return std::string(side);
    }
  }
  return std::nullopt;
}

std::vector<std::string> RegionSet::validation_errors() const {
  std::vector<std::string> errors;
  std::set<std::string> seen;
  for (const auto& r : regions) {
    if (!is_known_label(r.label)) errors.push_back("unknown region label '" + r.label + "'");
    if (!seen.insert(r.label).second) errors.push_back("duplicate region label '" + r.label + "'");
    if (r.polygon.size() < 3) {
      errors.push_back(r.label + ": polygon needs at least 3 vertices");
    } else if (!is_simple(r.polygon)) {
      errors.push_back(r.label + ": polygon is self-intersecting or degenerate");
    }
  }
  if (!errors.empty()) return errors;

  const Region* left = find("foot-L");
  const Region* right = find("foot-R");
  if (left && right && !polygons_disjoint(left->polygon, right->polygon)) {
    errors.push_back("foot-L and foot-R overlap");
  }
  for (const auto& r : regions) {
    if (r.label.starts_with("foot-")) continue;
    if (r.label.starts_with("callus-")) {
      if (!foot_of(r)) errors.push_back(r.label + ": not contained in foot-L or foot-R");
      continue;
    }
    const std::string side = r.label.substr(r.label.size() - 1);
    const Region* foot = find("foot-" + side);
    if (!foot) {
      errors.push_back(r.label + ": requires foot-" + side);
    } else if (!contains_polygon(foot->polygon, r.polygon)) {
      errors.push_back(r.label + ": not contained in foot-" + side);
    }
  }
  return errors;
}

void RegionSet::validate() const {
  const auto errors = validation_errors();
  if (errors.empty()) return;
  std::string msg = "invalid region set:";
  for (const auto& e : errors) msg += " " + e + ";";
  throw DataError(msg);
}

void to_json(nlohmann::json& j, const RegionSet& set) {
  auto features = nlohmann::json::array();
  for (const auto& r : set.regions) {
    auto ring = nlohmann::json::array();
    for (const auto& v : r.polygon) ring.push_back({v.x(), v.y()});
    if (!r.polygon.empty()) ring.push_back({r.polygon.front().x(), r.polygon.front().y()});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"label", r.label}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}}});
  }
  j = {{"type", "FeatureCollection"}, {"units", "cm"}, {"features", features}};
}

void from_json(const nlohmann::json& j, RegionSet& set) {
  RegionSet out;
  try {
    const auto& features = j.at("features");
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto& f = features[i];
      Region r;
      r.label = f.at("properties").at("label").get<std::string>();
      const auto& geom = f.at("geometry");
      if (geom.at("type") != "Polygon") throw DataError("/features/" + std::to_string(i) + ": geometry must be Polygon");
      for (const auto& v : geom.at("coordinates").at(0)) r.polygon.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
      if (r.polygon.size() > 1 && r.polygon.front() == r.polygon.back()) r.polygon.pop_back();
      out.regions.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("region set json: ") + e.what());
  }
  set = std::move(out);
}

CellSet mask_cells(const PressureField& field, const Polygon& polygon) {
  if (polygon.size() < 3) throw DataError("mask_cells: polygon needs at least 3 vertices");
  Eigen::Vector2d lo = polygon.front();
  Eigen::Vector2d hi = polygon.front();
  for (const auto& v : polygon) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const auto clamp_index = [](double v, Eigen::Index n) {
    return static_cast<Eigen::Index>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
  };
  const Eigen::Index c0 = clamp_index(std::floor((lo.x() - field.origin_cm.x()) / field.pitch_cm), field.cols());
  const Eigen::Index c1 = clamp_index(std::ceil((hi.x() - field.origin_cm.x()) / field.pitch_cm), field.cols());
  const Eigen::Index r0 = clamp_index(std::floor((lo.y() - field.origin_cm.y()) / field.pitch_cm), field.rows());
  const Eigen::Index r1 = clamp_index(std::ceil((hi.y() - field.origin_cm.y()) / field.pitch_cm), field.rows());
  CellSet out;
  for (Eigen::Index c = c0; c <= c1; ++c) {
    for (Eigen::Index r = r0; r <= r1; ++r) {
      if (point_in_polygon(polygon, field.cell_center(r, c))) out.push_back(r + c * field.rows());
    }
  }
  return out;
}

MeanPressure mean_foot_pressure(const PressureField& field, const CellSet& cells, double threshold) {
  MeanPressure m;
  double sum = 0.0;
  for (auto i : cells) {
    const double p = field.values(i);
    if (p > threshold) {
      sum += p;
      ++m.contact_cells;
    }
  }
  if (m.contact_cells > 0) {
    m.kpa = sum / static_cast<double>(m.contact_cells);
    m.empty_contact = false;
  }
  return m;
}

double region_sum(const PressureField& field, const CellSet& cells) {
  double sum = 0.0;
  for (auto i : cells) sum += field.values(i);
  return sum;
}

std::optional<Eigen::Vector2d> center_of_pressure(const PressureField& field, const CellSet& cells) {
  double total = 0.0;
  Eigen::Vector2d moment = Eigen::Vector2d::Zero();
  for (auto i : cells) {
    const double p = field.values(i);
    total += p;
    moment += p * field.cell_center(i % field.rows(), i / field.rows());
  }
  if (!(total > 0.0)) return std::nullopt;
  return Eigen::Vector2d(moment / total);
}

std::optional<double> load_percentage(const PressureField& field, const CellSet& foot, double total) {
  if (!(total > 0.0)) return std::nullopt;
  return 100.0 * region_sum(field, foot) / total;
}

RegionStats regional_stats(const PressureField& field, const CellSet& sub, const CellSet& parent, double threshold) {
  if (!std::includes(parent.begin(), parent.end(), sub.begin(), sub.end())) {
    throw DataError("regional_stats: subregion has cells outside its parent foot region");
  }
  RegionStats s;
  const auto mean = mean_foot_pressure(field, sub, threshold);
  s.mean_kpa = mean.kpa;
  s.empty_contact = mean.empty_contact;
  for (auto i : sub) s.max_kpa = std::max(s.max_kpa, field.values(i));
  const double parent_sum = region_sum(field, parent);
  if (parent_sum > 0.0) s.load_pct = 100.0 * region_sum(field, sub) / parent_sum;
  return s;
}

MetricsReport full_report(const PressureField& field, const RegionSet& regions, double threshold) {
  std::vector<std::string> missing;
  for (const char* label : {"foot-L", "foot-R", "heel-L", "heel-R", "metatarsal-L", "metatarsal-R"}) {
    if (!regions.find(label)) missing.emplace_back(label);
  }
  if (!missing.empty()) {
    std::string msg = "full_report: missing region labels:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  regions.validate();

  MetricsReport report;
  report.contact_threshold_kpa = threshold;
  const CellSet left = mask_cells(field, regions.find("foot-L")->polygon);
  const CellSet right = mask_cells(field, regions.find("foot-R")->polygon);
  CellSet both;
  std::set_union(left.begin(), left.end(), right.begin(), right.end(), std::back_inserter(both));
  const double total = region_sum(field, both);
  report.no_contact = !(total > 0.0);
  report.resultant_cop_cm = center_of_pressure(field, both);

  auto fill = [&](FootReport& foot, const CellSet& cells, const std::string& side) {
    const auto mfp = mean_foot_pressure(field, cells, threshold);
    foot.mfp_kpa = mfp.kpa;
    foot.empty_contact = mfp.empty_contact;
    foot.load_pct = load_percentage(field, cells, total).value_or(0.0);
    foot.cop_cm = center_of_pressure(field, cells);
    foot.heel = regional_stats(field, mask_cells(field, regions.find("heel-" + side)->polygon), cells, threshold);
    foot.metatarsal =
        regional_stats(field, mask_cells(field, regions.find("metatarsal-" + side)->polygon), cells, threshold);
  };
  fill(report.left, left, "L");
  fill(report.right, right, "R");

  for (const auto& r : regions.regions) {
    if (!r.label.starts_with("callus-")) continue;
    const auto side = regions.foot_of(r);
    if (!side) continue;
    auto& foot = (*side == "L") ? report.left : report.right;
    foot.callus.emplace_back(r.label, regional_stats(field, mask_cells(field, r.polygon), *side == "L" ? left : right,
                                                     threshold));
    if (!report.calloused_foot) report.calloused_foot = *side;
  }
  return report;
}

RegionSet auto_split_feet(const PressureField& field, double threshold) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (Eigen::Index c = 0; c < field.cols(); ++c) {
    for (Eigen::Index r = 0; r < field.rows(); ++r) {
      if (field.values(r, c) > threshold) {
        lo = lo.cwiseMin(field.cell_center(r, c));
        hi = hi.cwiseMax(field.cell_center(r, c));
      }
    }
  }
  if (!std::isfinite(lo.x())) throw DataError("auto_split_feet: no cell exceeds the contact threshold");
  const double mid = 0.5 * (lo.x() + hi.x());
  const double margin = field.pitch_cm;

  RegionSet set;
  for (const char* side : {"L", "R"}) {
    const bool is_left = side[0] == 'L';
    Eigen::Vector2d flo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector2d fhi = -flo;
    for (Eigen::Index c = 0; c < field.cols(); ++c) {
      for (Eigen::Index r = 0; r < field.rows(); ++r) {
        const auto p = field.cell_center(r, c);
        if (field.values(r, c) > threshold && (p.x() < mid) == is_left) {
          flo = flo.cwiseMin(p);
          fhi = fhi.cwiseMax(p);
        }
      }
    }
    if (!std::isfinite(flo.x())) throw DataError(std::string("auto_split_feet: no contact on foot ") + side);
    // Keep the two foot boxes a little apart so they stay disjoint.
    double x0 = flo.x() - margin;
    double x1 = fhi.x() + margin;
    if (is_left) x1 = std::min(x1, mid - 0.25 * margin);
    else x0 = std::max(x0, mid + 0.25 * margin);
    const double y0 = flo.y() - margin;
    const double y1 = fhi.y() + margin;
    const double len = y1 - y0;
    auto rect = [](double ax, double ay, double bx, double by) {
      return Polygon{{ax, ay}, {bx, ay}, {bx, by}, {ax, by}};
    };
    const double inset = 0.01 * (x1 - x0);
    set.regions.push_back({std::string("foot-") + side, rect(x0, y0, x1, y1)});
    set.regions.push_back({std::string("heel-") + side, rect(x0 + inset, y0 + 0.01 * len, x1 - inset, y0 + 0.30 * len)});
    set.regions.push_back(
        {std::string("metatarsal-") + side, rect(x0 + inset, y0 + 0.55 * len, x1 - inset, y0 + 0.80 * len)});
  }
  return set;
}

}  // namespace pmat
