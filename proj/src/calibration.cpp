#include "pmat/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>

#include "pmat/error.hpp"

namespace pmat {

std::optional<double> invert_divider(const DividerConfig& cfg, double count) {
  if (count <= 0.0) return std::nullopt;
  const double v = count / cfg.full_scale() * cfg.adc_vref;
  return std::max(0.0, cfg.r_fixed_ohm * (cfg.v_supply / v - 1.0));
}

namespace {

struct Point {
  double p;
  double c;
};

std::string describe(const std::vector<Point>& pts, const std::vector<std::size_t>& idx) {
  std::ostringstream os;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k) os << ", ";
    os << "(" << pts[idx[k]].p << " kPa, " << pts[idx[k]].c << ")";
  }
  return os.str();
}

// Sort by pressure, merge repeated pressures, median-of-3 prefilter, then
// require counts that never fall as pressure rises.
std::vector<Point> prepare_branch(const std::vector<CalibrationSample>& samples, Branch branch, const char* name) {
  std::map<double, std::pair<double, int>> by_pressure;
  for (const auto& s : samples) {
    if (s.branch != branch) continue;
    if (!(s.applied_pressure_kpa >= 0.0) || !std::isfinite(s.applied_pressure_kpa)) {
      throw DataError(std::string("build_curve: negative or non-finite pressure in ") + name + " branch");
    }
    if (!(s.observed_count >= 0.0 && s.observed_count <= 4095.0)) {
      throw DataError(std::string("build_curve: count outside [0, 4095] in ") + name + " branch");
    }
    auto& [sum, n] = by_pressure[s.applied_pressure_kpa];
    sum += s.observed_count;
    ++n;
  }
  std::vector<Point> pts;
  for (const auto& [p, acc] : by_pressure) pts.push_back({p, acc.first / acc.second});
  if (pts.size() < 4) {
    throw DataError(std::string("build_curve: ") + name + " branch needs at least 4 distinct pressures, got " +
                    std::to_string(pts.size()));
  }
  std::vector<Point> filtered = pts;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    double w[3] = {pts[i - 1].c, pts[i].c, pts[i + 1].c};
    std::sort(w, w + 3);
    filtered[i].c = w[1];
  }
  std::vector<std::size_t> bad;
  for (std::size_t i = 1; i < filtered.size(); ++i) {
    if (filtered[i].c < filtered[i - 1].c) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw DataError(std::string("build_curve: ") + name + " branch is not monotone at samples " +
                    describe(pts, bad));
  }
  return filtered;
}

// Turns a prepared branch into a strictly increasing count -> kPa relation.
// A run of samples sharing one count collapses to the run's mean pressure;
// the run holding zero load pins to 0 kPa.
std::vector<Point> invert_branch(const std::vector<Point>& pts) {
  std::vector<Point> out;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i + 1;
    double psum = pts[i].p;
    while (j < pts.size() && pts[j].c == pts[i].c) psum += pts[j++].p;
    out.push_back({pts[i].p == 0.0 ? 0.0 : psum / static_cast<double>(j - i), pts[i].c});
    i = j;
  }
  return out;
}

// Linear kPa at count c on an inverted branch; c must lie inside it.
double kpa_at(const std::vector<Point>& inv, double c) {
  auto it = std::lower_bound(inv.begin(), inv.end(), c, [](const Point& a, double v) { return a.c < v; });
  if (it == inv.begin()) return inv.front().p;
  if (it == inv.end()) return inv.back().p;
  const Point& hi = *it;
  const Point& lo = *(it - 1);
  return lo.p + (c - lo.c) / (hi.c - lo.c) * (hi.p - lo.p);
}

// Fritsch-Carlson: start from three-point slopes, zero them at extrema and
// scale pairs that would break monotonicity.
std::vector<double> monotone_slopes(const std::vector<CalibrationCurve::Knot>& k) {
  const std::size_t n = k.size();
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (k[i + 1].kpa - k[i].kpa) / (k[i + 1].count - k[i].count);
  std::vector<double> m(n);
  m[0] = delta[0];
  m[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    m[i] = (delta[i - 1] * delta[i] <= 0.0) ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      m[i] = m[i + 1] = 0.0;
      continue;
    }
    const double a = m[i] / delta[i];
    const double b = m[i + 1] / delta[i];
    const double s = a * a + b * b;
    if (s > 9.0) {
      const double tau = 3.0 / std::sqrt(s);
      m[i] = tau * a * delta[i];
      m[i + 1] = tau * b * delta[i];
    }
  }
  return m;
}

}  // namespace

CalibrationCurve::CalibrationCurve(std::vector<Knot> knots, DividerConfig divider)
    : knots_(std::move(knots)), divider_(divider) {
  if (knots_.size() < 2) throw DataError("calibration curve needs at least 2 knots");
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i].count > knots_[i - 1].count) || !(knots_[i].kpa > knots_[i - 1].kpa)) {
      throw DataError("calibration curve knots must be strictly increasing in count and kPa (knot " +
                      std::to_string(i) + ")");
    }
  }
  slopes_ = monotone_slopes(knots_);
  build_lut();
}

CalibrationCurve::Value CalibrationCurve::evaluate(double count) const {
  Value v;
  if (count < knots_.front().count) {
    v.below_floor = true;
    return v;
  }
  if (count > knots_.back().count) {
    v.kpa = knots_.back().kpa;
    v.saturated = true;
    return v;
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), count, [](double c, const Knot& k) { return c < k.count; });
  if (it == knots_.end()) {
    v.kpa = knots_.back().kpa;
    return v;
  }
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const Knot& a = knots_[i];
  const Knot& b = knots_[i + 1];
  const double h = b.count - a.count;
  const double t = (count - a.count) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  v.kpa = (2 * t3 - 3 * t2 + 1) * a.kpa + (t3 - 2 * t2 + t) * h * slopes_[i] + (-2 * t3 + 3 * t2) * b.kpa +
          (t3 - t2) * h * slopes_[i + 1];
  v.kpa = std::clamp(v.kpa, a.kpa, b.kpa);
  return v;
}

void CalibrationCurve::build_lut() {
  lut_.assign(static_cast<std::size_t>(divider_.full_scale()) + 1, 0.0);
  for (std::size_t c = 0; c < lut_.size(); ++c) lut_[c] = evaluate(static_cast<double>(c)).kpa;
}

std::string CalibrationCurve::id() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](double d) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &d, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& k : knots_) {
    mix(k.count);
    mix(k.kpa);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CalibrationCurve build_curve(const std::vector<CalibrationSample>& samples, const DividerConfig& divider) {
  const auto load = prepare_branch(samples, Branch::loading, "loading");
  const auto unload = prepare_branch(samples, Branch::unloading, "unloading");

  const double lo = std::max(load.front().p, unload.front().p);
  const double hi = std::min(load.back().p, unload.back().p);
  const double uni = std::max(load.back().p, unload.back().p) - std::min(load.front().p, unload.front().p);
  const double overlap = std::max(0.0, hi - lo);
  if (uni <= 0.0 || overlap / uni < 0.5) {
    throw DataError("build_curve: loading and unloading branches overlap on only " +
                    std::to_string(uni > 0 ? 100.0 * overlap / uni : 0.0) + "% of their pressure range (need 50%)");
  }

  // Both branches are read as kPa over a shared count grid and averaged
  // there: for branches f(c) + d and f(c) - d the mean is f itself.
  const auto load_inv = invert_branch(load);
  const auto unload_inv = invert_branch(unload);
  const double c_lo = std::max(load_inv.front().c, unload_inv.front().c);
  const double c_hi = std::min(load_inv.back().c, unload_inv.back().c);
  std::vector<double> grid;
  for (const auto* branch : {&load_inv, &unload_inv}) {
    for (const auto& pt : *branch) {
      if (pt.c >= c_lo && pt.c <= c_hi) grid.push_back(pt.c);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<CalibrationCurve::Knot> knots;
  for (double c : grid) {
    const double p = 0.5 * (kpa_at(load_inv, c) + kpa_at(unload_inv, c));
    if (knots.empty() || p > knots.back().kpa) knots.push_back({c, p});
  }
  if (knots.size() < 2) throw DataError("build_curve: samples do not span more than one count level");
  return CalibrationCurve(std::move(knots), divider);
}

void calibrate_into(const CalibrationCurve& curve, const RawFrame& frame, Eigen::VectorXd& out) {
  out.resize(kChannels);
  for (int ch = 0; ch < kChannels; ++ch) out[ch] = curve.lookup(frame.counts[ch]);
}

CalibratedFrame calibrate(const CalibrationCurve& curve, const RawFrame& frame) {
  CalibratedFrame out;
  calibrate_into(curve, frame, out.kpa);
  for (int ch = 0; ch < kChannels; ++ch) out.saturated_channels += curve.saturates(frame.counts[ch]) ? 1 : 0;
  return out;
}

std::vector<double> default_sweep_pressures() {
  std::vector<double> p;
  for (int k = 0; k <= 700; ++k) p.push_back(k);
  return p;
}

std::vector<CalibrationSample> run_calibration_sweep(const SimulatorConfig& base, const std::vector<double>& pressures,
                                                     const CalibrationRig& rig) {
  if (pressures.size() < 4) throw DataError("calibration sweep needs at least 4 pressures");
  if (rig.frames_per_step < 1) throw DataError("calibration rig: frames_per_step must be >= 1");
  if (rig.overshoot_kpa < 0.0) throw DataError("calibration rig: overshoot_kpa must be >= 0");
  SimulatorConfig cfg = base;
  const double side = std::sqrt(rig.base_cm2);
  const double panel_side = kLatticeSide * cfg.layout.pitch_cm;
  const Eigen::Vector2d centre = cfg.layout.panel_origin_cm[0] + Eigen::Vector2d::Constant(0.5 * (panel_side - cfg.layout.pitch_cm));
  Plate plate;
  plate.min_cm = centre - Eigen::Vector2d::Constant(0.5 * side);
  plate.max_cm = centre + Eigen::Vector2d::Constant(0.5 * side);
  cfg.scene.blobs.clear();
  cfg.scene.plates = {plate};
  cfg.scene.sway = {};

  Simulator sim(cfg);
  std::vector<int> covered;
  for (int ch = 0; ch < kChannels; ++ch) {
    if (plate.contains(sim.positions().col(ch))) covered.push_back(ch);
  }

  std::vector<double> sorted = pressures;
  std::sort(sorted.begin(), sorted.end());
  std::vector<CalibrationSample> out;
  std::uint64_t frame_index = 0;
  auto press = [&](double p) {
    Scene scene = cfg.scene;
    scene.plates[0].pressure_kpa = p;
    sim.set_scene(scene);
  };
  auto measure = [&](double p, Branch branch) {
    press(p);
    double sum = 0.0;
    for (int f = 0; f < rig.frames_per_step; ++f) {
      const RawFrame frame = sim.scan_frame(sim.time_of_frame(frame_index++));
      for (int ch : covered) sum += frame.counts[ch];
    }
    out.push_back({p, sum / (static_cast<double>(covered.size()) * rig.frames_per_step), branch});
  };
  for (double p : sorted) measure(p, Branch::loading);
  if (rig.overshoot_kpa > 0.0) {
    press(sorted.back() + rig.overshoot_kpa);
    sim.scan_frame(sim.time_of_frame(frame_index++));
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) measure(*it, Branch::unloading);
  return out;
}

std::vector<CalibrationSample> parse_calibration_csv(const std::string& text) {
  std::vector<CalibrationSample> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',')) {
      throw DataError("calibration csv line " + std::to_string(lineno) + ": expected pressure,count,branch");
    }
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    a = trim(a);
    b = trim(b);
    c = trim(c);
    CalibrationSample s;
    try {
      std::size_t used = 0;
      s.applied_pressure_kpa = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      s.observed_count = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
    } catch (const std::exception&) {
      if (lineno == 1 && out.empty()) continue;  // header row
      throw DataError("calibration csv line " + std::to_string(lineno) + ": non-numeric pressure or count");
    }
    if (c == "loading" || c == "L" || c == "load") {
      s.branch = Branch::loading;
    } else if (c == "unloading" || c == "U" || c == "unload") {
      s.branch = Branch::unloading;
    } else {
      throw DataError("calibration csv line " + std::to_string(lineno) + ": unknown branch '" + c + "'");
    }
    out.push_back(s);
  }
  return out;
}

void to_json(nlohmann::json& j, const CalibrationCurve& curve) {
  auto knots = nlohmann::json::array();
  for (const auto& k : curve.knots()) knots.push_back({k.count, k.kpa});
  j = {{"method", CalibrationCurve::method()},
       {"knots", knots},
       {"valid_range", {curve.min_count(), curve.max_count()}},
       {"divider", curve.divider()},
       {"id", curve.id()}};
}

void from_json(const nlohmann::json& j, CalibrationCurve& curve) {
  try {
    if (j.value("method", std::string(CalibrationCurve::method())) != CalibrationCurve::method()) {
      throw DataError("calibration: unsupported method '" + j.at("method").get<std::string>() + "'");
    }
    std::vector<CalibrationCurve::Knot> knots;
    for (const auto& k : j.at("knots")) knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
    DividerConfig divider;
    if (j.contains("divider")) divider = j.at("divider").get<DividerConfig>();
    curve = CalibrationCurve(std::move(knots), divider);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("calibration json: ") + e.what());
  }
}

}  // namespace pmat
