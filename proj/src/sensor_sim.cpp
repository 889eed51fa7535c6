#include "pmat/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pmat/error.hpp"
#include "pmat/json_util.hpp"

namespace pmat {

namespace {

constexpr double kGravity = 9.80665;
constexpr double kNewtonsPerKpaCm2 = 0.1;

// Normalised position on the mean curve: 1 at no load, falling to 0.
double unloaded_fraction(const SensorModel& m, double p) {
  if (p <= 0.0) return 1.0;
  return 1.0 / (1.0 + std::pow(p / m.p_half_kpa, m.exponent));
}

}  // namespace

void DividerConfig::validate() const {
  if (!(r_fixed_ohm > 0.0)) throw DataError("divider: r_fixed_ohm must be > 0");
  if (!(v_supply > 0.0) || v_supply > adc_vref) {
    throw DataError("divider: require 0 < v_supply <= adc_vref");
  }
  if (adc_bits < 1 || adc_bits > 16) throw DataError("divider: adc_bits must be in [1, 16]");
}

void SensorModel::validate() const {
  if (!(r_min_ohm > 0.0) || !(r_max_ohm > r_min_ohm)) throw DataError("model: require 0 < r_min < r_max");
  if (!(p_half_kpa > 0.0)) throw DataError("model: p_half_kpa must be > 0");
  if (!(exponent > 0.0)) throw DataError("model: exponent must be > 0");
  // Above 0.5 the loading branch stops being monotone near zero load.
  if (hysteresis_band < 0.0 || hysteresis_band >= 0.5) throw DataError("model: hysteresis_band must be in [0, 0.5)");
  if (!(blend_rate_per_kpa > 0.0)) throw DataError("model: blend_rate_per_kpa must be > 0");
}

double mean_resistance(const SensorModel& m, double p) {
  if (p < 0.0) throw DataError("resistance_of: negative pressure " + std::to_string(p));
  return m.r_min_ohm + (m.r_max_ohm - m.r_min_ohm) * unloaded_fraction(m, p);
}

double resistance_of(const SensorModel& m, double p, const BranchState& state) {
  if (p < 0.0) throw DataError("resistance_of: negative pressure " + std::to_string(p));
  const double u = unloaded_fraction(m, p);
  // R = r_min + span * u * (1 + h * s * (1 - u^2)); dR/du > 0 for h < 0.5.
  const double offset = m.hysteresis_band * state.branch * (1.0 - u * u);
  return m.r_min_ohm + (m.r_max_ohm - m.r_min_ohm) * u * (1.0 + offset);
}

BranchState advance_branch(const SensorModel& m, const BranchState& state, double p) {
  if (p < 0.0) throw DataError("advance_branch: negative pressure " + std::to_string(p));
  if (p == 0.0) return BranchState{};
  const double dp = p - state.last_pressure_kpa;
  if (dp == 0.0) return state;
  const double target = dp > 0.0 ? 1.0 : -1.0;
  BranchState next;
  next.last_pressure_kpa = p;
  next.branch = target + (state.branch - target) * std::exp(-m.blend_rate_per_kpa * std::abs(dp));
  return next;
}

double divider_voltage(const DividerConfig& cfg, double r_sensor) {
  if (r_sensor < 0.0) throw DataError("divider_voltage: negative resistance");
  if (std::isinf(r_sensor)) return 0.0;
  return cfg.v_supply * cfg.r_fixed_ohm / (cfg.r_fixed_ohm + r_sensor);
}

std::uint16_t adc_quantize(const DividerConfig& cfg, double volts) {
  const double scaled = std::round(volts / cfg.adc_vref * cfg.full_scale());
  return static_cast<std::uint16_t>(std::clamp(scaled, 0.0, static_cast<double>(cfg.full_scale())));
}

std::string to_string(BlobLabel label) {
  switch (label) {
    case BlobLabel::heel_l: return "heel-L";
    case BlobLabel::heel_r: return "heel-R";
    case BlobLabel::met12_l: return "met1-2-L";
    case BlobLabel::met12_r: return "met1-2-R";
    case BlobLabel::met5_l: return "met5-L";
    case BlobLabel::met5_r: return "met5-R";
    case BlobLabel::midfoot: return "midfoot";
    case BlobLabel::toes: return "toes";
    case BlobLabel::callus_hotspot: return "callus-hotspot";
  }
  return "midfoot";
}

BlobLabel blob_label_from_string(const std::string& s) {
  for (auto l : {BlobLabel::heel_l, BlobLabel::heel_r, BlobLabel::met12_l, BlobLabel::met12_r, BlobLabel::met5_l,
                 BlobLabel::met5_r, BlobLabel::midfoot, BlobLabel::toes, BlobLabel::callus_hotspot}) {
    if (to_string(l) == s) return l;
  }
  throw DataError("unknown blob label '" + s + "'");
}

double PressureBlob::evaluate(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d d = p - center_cm;
  const double c = std::cos(rotation_rad);
  const double s = std::sin(rotation_rad);
  const double u = (c * d.x() + s * d.y()) / sigma_cm.x();
  const double v = (-s * d.x() + c * d.y()) / sigma_cm.y();
  return amplitude_kpa * std::exp(-0.5 * (u * u + v * v));
}

double PressureBlob::mass() const {
  return amplitude_kpa * 2.0 * std::numbers::pi * sigma_cm.x() * sigma_cm.y();
}

void Scene::validate() const {
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const auto& b = blobs[i];
    if (!std::isfinite(b.amplitude_kpa) || b.amplitude_kpa < 0.0) {
      throw DataError("/scene/blobs/" + std::to_string(i) + "/amplitude_kpa: must be finite and >= 0");
    }
    if (!(b.sigma_cm.x() > 0.0) || !(b.sigma_cm.y() > 0.0)) {
      throw DataError("/scene/blobs/" + std::to_string(i) + "/sigma_cm: must be > 0");
    }
  }
  for (std::size_t i = 0; i < plates.size(); ++i) {
    if (!std::isfinite(plates[i].pressure_kpa) || plates[i].pressure_kpa < 0.0) {
      throw DataError("/scene/plates/" + std::to_string(i) + "/pressure_kpa: must be finite and >= 0");
    }
  }
  if (!(noise_sigma_kpa >= 0.0)) throw DataError("/scene/noise_sigma_kpa: must be >= 0");
}

std::optional<Eigen::Vector2d> Scene::foot_center(Foot foot) const {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  double mass = 0.0;
  for (const auto& b : blobs) {
    if (b.foot != foot) continue;
    acc += b.mass() * b.center_cm;
    mass += b.mass();
  }
  if (mass <= 0.0) return std::nullopt;
  return Eigen::Vector2d(acc / mass);
}

double Scene::total_load_n() const {
  double mass = 0.0;
  for (const auto& b : blobs) mass += b.mass();
  return mass * kNewtonsPerKpaCm2;
}

void scale_to_body_weight(Scene& scene, double body_weight_kg) {
  const double current = scene.total_load_n();
  if (current <= 0.0) throw DataError("scale_to_body_weight: scene has no load to scale");
  const double k = body_weight_kg * kGravity / current;
  for (auto& b : scene.blobs) b.amplitude_kpa *= k;
  scene.body_weight_kg = body_weight_kg;
}

double GaussianNoise::operator()() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = static_cast<double>(engine_() >> 11) * kScale;
  const double u2 = static_cast<double>(engine_() >> 11) * kScale;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Eigen::VectorXd render_scene(const Scene& scene, double t, const Eigen::Matrix2Xd& positions) {
  if (t < 0.0) throw DataError("render_scene: negative time");
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
  if (scene.sway.frequency_hz > 0.0) {
    shift = scene.sway.amplitude_cm * std::sin(2.0 * std::numbers::pi * scene.sway.frequency_hz * t);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) {
    const Eigen::Vector2d p = positions.col(i);
    double v = 0.0;
    for (const auto& b : scene.blobs) v += b.evaluate(p - shift);
    for (const auto& plate : scene.plates) {
      if (plate.contains(p)) v += plate.pressure_kpa;
    }
    out[i] = v;
  }
  return out;
}

Eigen::VectorXd render_scene(const Scene& scene, double t, const Eigen::Matrix2Xd& positions, GaussianNoise& noise) {
  Eigen::VectorXd out = render_scene(scene, t, positions);
  if (scene.noise_sigma_kpa > 0.0) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i] + scene.noise_sigma_kpa * noise());
  }
  return out;
}

Simulator::Simulator(SimulatorConfig config)
    : config_(std::move(config)), states_(kChannels), noise_(config_.seed) {
  config_.layout.validate();
  config_.divider.validate();
  config_.model.validate();
  config_.scene.validate();
  if (!(config_.frame_rate_hz > 0.0)) throw DataError("simulator: frame_rate_hz must be > 0");
  positions_ = sensor_positions(config_.layout);
}

void Simulator::set_scene(Scene scene) {
  scene.validate();
  config_.scene = std::move(scene);
}

Eigen::VectorXd Simulator::render(double t) { return render_scene(config_.scene, t, positions_, noise_); }

RawFrame Simulator::transduce(const Eigen::VectorXd& pressures, double t) {
  if (last_t_ && t < *last_t_) {
    throw DataError("simulator clock went backwards: t=" + std::to_string(t) + " after " + std::to_string(*last_t_));
  }
  if (pressures.size() != kChannels) throw DataError("transduce: expected 1024 pressures");
  last_t_ = t;
  RawFrame frame;
  frame.seq = next_seq_++;
  frame.timestamp_us = static_cast<std::uint64_t>(std::llround(t * 1e6));
  for (int ch = 0; ch < kChannels; ++ch) {
    states_[ch] = advance_branch(config_.model, states_[ch], pressures[ch]);
    const double r = resistance_of(config_.model, pressures[ch], states_[ch]);
    frame.counts[ch] = adc_quantize(config_.divider, divider_voltage(config_.divider, r));
  }
  return frame;
}

RawFrame Simulator::next_frame() { return scan_frame(time_of_frame(next_seq_)); }

// --- JSON -------------------------------------------------------------------

void to_json(nlohmann::json& j, const DividerConfig& c) {
  j = {{"r_fixed_ohm", c.r_fixed_ohm}, {"v_supply", c.v_supply}, {"adc_bits", c.adc_bits}, {"adc_vref", c.adc_vref}};
}

void from_json(const nlohmann::json& j, DividerConfig& c) {
  DividerConfig d;
  c.r_fixed_ohm = j.value("r_fixed_ohm", d.r_fixed_ohm);
  c.v_supply = j.value("v_supply", d.v_supply);
  c.adc_bits = j.value("adc_bits", d.adc_bits);
  c.adc_vref = j.value("adc_vref", d.adc_vref);
}

void to_json(nlohmann::json& j, const SensorModel& m) {
  j = {{"r_min_ohm", m.r_min_ohm},         {"r_max_ohm", m.r_max_ohm},
       {"p_half_kpa", m.p_half_kpa},       {"exponent", m.exponent},
       {"hysteresis_band", m.hysteresis_band}, {"blend_rate_per_kpa", m.blend_rate_per_kpa}};
}

void from_json(const nlohmann::json& j, SensorModel& m) {
  SensorModel d;
  m.r_min_ohm = j.value("r_min_ohm", d.r_min_ohm);
  m.r_max_ohm = j.value("r_max_ohm", d.r_max_ohm);
  m.p_half_kpa = j.value("p_half_kpa", d.p_half_kpa);
  m.exponent = j.value("exponent", d.exponent);
  m.hysteresis_band = j.value("hysteresis_band", d.hysteresis_band);
  m.blend_rate_per_kpa = j.value("blend_rate_per_kpa", d.blend_rate_per_kpa);
}

void to_json(nlohmann::json& j, const Scene& s) {
  j = nlohmann::json::object();
  auto& blobs = j["blobs"] = nlohmann::json::array();
  for (const auto& b : s.blobs) {
    blobs.push_back({{"label", to_string(b.label)},
                     {"foot", b.foot == Foot::left ? "L" : "R"},
                     {"center_cm", b.center_cm},
                     {"amplitude_kpa", b.amplitude_kpa},
                     {"sigma_cm", b.sigma_cm},
                     {"rotation_deg", b.rotation_rad * 180.0 / std::numbers::pi}});
  }
  auto& plates = j["plates"] = nlohmann::json::array();
  for (const auto& p : s.plates) {
    plates.push_back({{"min_cm", p.min_cm}, {"max_cm", p.max_cm}, {"pressure_kpa", p.pressure_kpa}});
  }
  j["sway"] = {{"amplitude_cm", s.sway.amplitude_cm}, {"frequency_hz", s.sway.frequency_hz}};
  j["noise_sigma_kpa"] = s.noise_sigma_kpa;
  if (s.body_weight_kg) j["body_weight_kg"] = *s.body_weight_kg;
}

namespace {

Foot foot_of(const std::string& label, const nlohmann::json& b, const std::string& path) {
  if (b.contains("foot")) {
    const auto f = b.at("foot").get<std::string>();
    if (f == "L") return Foot::left;
    if (f == "R") return Foot::right;
    throw DataError(path + "/foot: expected \"L\" or \"R\"");
  }
  if (label.ends_with("-L")) return Foot::left;
  if (label.ends_with("-R")) return Foot::right;
  throw DataError(path + "/foot: required for label '" + label + "'");
}

template <typename F>
auto at_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace

void from_json(const nlohmann::json& j, Scene& s) {
  Scene out;
  if (j.contains("blobs")) {
    const auto& blobs = j.at("blobs");
    for (std::size_t i = 0; i < blobs.size(); ++i) {
      const std::string path = "/scene/blobs/" + std::to_string(i);
      const auto& b = blobs[i];
      PressureBlob blob;
      const auto label = at_path(path + "/label", [&] { return b.at("label").get<std::string>(); });
      blob.label = blob_label_from_string(label);
      blob.foot = foot_of(label, b, path);
      blob.center_cm = at_path(path + "/center_cm", [&] { return b.at("center_cm").get<Eigen::Vector2d>(); });
      blob.amplitude_kpa = at_path(path + "/amplitude_kpa", [&] { return b.at("amplitude_kpa").get<double>(); });
      blob.sigma_cm = at_path(path + "/sigma_cm", [&] { return b.value("sigma_cm", Eigen::Vector2d(1.0, 1.0)); });
      blob.rotation_rad =
          at_path(path + "/rotation_deg", [&] { return b.value("rotation_deg", 0.0); }) * std::numbers::pi / 180.0;
      out.blobs.push_back(blob);
    }
  }
  if (j.contains("plates")) {
    const auto& plates = j.at("plates");
    for (std::size_t i = 0; i < plates.size(); ++i) {
      const std::string path = "/scene/plates/" + std::to_string(i);
      Plate p;
      p.min_cm = at_path(path + "/min_cm", [&] { return plates[i].at("min_cm").get<Eigen::Vector2d>(); });
      p.max_cm = at_path(path + "/max_cm", [&] { return plates[i].at("max_cm").get<Eigen::Vector2d>(); });
      p.pressure_kpa = at_path(path + "/pressure_kpa", [&] { return plates[i].at("pressure_kpa").get<double>(); });
      out.plates.push_back(p);
    }
  }
  if (j.contains("sway")) {
    const auto& sw = j.at("sway");
    out.sway.amplitude_cm =
        at_path("/scene/sway/amplitude_cm", [&] { return sw.value("amplitude_cm", Eigen::Vector2d::Zero().eval()); });
    out.sway.frequency_hz = at_path("/scene/sway/frequency_hz", [&] { return sw.value("frequency_hz", 0.0); });
  }
  out.noise_sigma_kpa = at_path("/scene/noise_sigma_kpa", [&] { return j.value("noise_sigma_kpa", 0.0); });
  out.validate();
  if (j.contains("body_weight_kg")) {
    const double kg = at_path("/scene/body_weight_kg", [&] { return j.at("body_weight_kg").get<double>(); });
    if (!(kg > 0.0)) throw DataError("/scene/body_weight_kg: must be > 0");
    scale_to_body_weight(out, kg);
  }
  s = std::move(out);
}

SimulatorConfig simulator_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("/: simulator config must be a JSON object");
  SimulatorConfig c;
  try {
    if (j.contains("layout")) c.layout = j.at("layout").get<SensorLayout>();
    if (j.contains("divider")) c.divider = j.at("divider").get<DividerConfig>();
    if (j.contains("model")) c.model = j.at("model").get<SensorModel>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("frame_rate_hz")) c.frame_rate_hz = j.at("frame_rate_hz").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("/: ") + e.what());
  }
  // A bare scene document is accepted as well as a full config.
  if (j.contains("scene")) {
    c.scene = j.at("scene").get<Scene>();
  } else if (j.contains("blobs") || j.contains("plates")) {
    c.scene = j.get<Scene>();
  }
  c.divider.validate();
  c.model.validate();
  return c;
}

nlohmann::json to_json(const SimulatorConfig& c) {
  return {{"layout", c.layout}, {"divider", c.divider}, {"model", c.model},
          {"scene", c.scene},   {"seed", c.seed},       {"frame_rate_hz", c.frame_rate_hz}};
}

}  // namespace pmat
