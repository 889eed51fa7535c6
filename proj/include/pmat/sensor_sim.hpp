#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pmat/geometry.hpp"

namespace pmat {

/// Fixed resistor in series with the sensor, read by an n-bit ADC.
struct DividerConfig {
  double r_fixed_ohm = 240.0;
  double v_supply = 3.3;
  int adc_bits = 12;
  double adc_vref = 3.3;

  void validate() const;
  int full_scale() const { return (1 << adc_bits) - 1; }
};

/// Piezoresistive element. The mean law is
///   R(P) = r_min + (r_max - r_min) / (1 + (P / p_half)^exponent)
/// and the loading/unloading branches sit a fraction hysteresis_band above
/// and below it, tapering to zero at P = 0 and as P grows without bound.
struct SensorModel {
  double r_min_ohm = 200.0;
  double r_max_ohm = 30000.0;
  double p_half_kpa = 80.0;
  double exponent = 1.2;
  double hysteresis_band = 0.05;
  double blend_rate_per_kpa = 0.05;

  void validate() const;
};

/// Per-sensor hysteresis memory. `branch` runs from +1 (loading) to -1
/// (unloading) and moves continuously with pressure travel.
struct BranchState {
  double last_pressure_kpa = 0.0;
  double branch = 1.0;

  friend bool operator==(const BranchState&, const BranchState&) = default;
};

/// Mean (hysteresis-free) resistance law.
double mean_resistance(const SensorModel& model, double pressure_kpa);

/// Resistance at `pressure_kpa` on the branch recorded in `state`.
double resistance_of(const SensorModel& model, double pressure_kpa, const BranchState& state);

/// State after moving the sensor to `pressure_kpa`. Returning to zero load
/// re-arms the loading branch.
BranchState advance_branch(const SensorModel& model, const BranchState& state, double pressure_kpa);

/// v_supply * r_fixed / (r_fixed + r_sensor); infinity gives 0 V.
double divider_voltage(const DividerConfig& cfg, double r_sensor_ohm);

/// round(volts / vref * full_scale), clamped to the ADC range.
std::uint16_t adc_quantize(const DividerConfig& cfg, double volts);

enum class BlobLabel { heel_l, heel_r, met12_l, met12_r, met5_l, met5_r, midfoot, toes, callus_hotspot };
enum class Foot { left, right };

std::string to_string(BlobLabel label);
BlobLabel blob_label_from_string(const std::string& s);

/// Anisotropic Gaussian pressure bump, peak value amplitude_kpa at center.
struct PressureBlob {
  Eigen::Vector2d center_cm = Eigen::Vector2d::Zero();
  double amplitude_kpa = 0.0;
  Eigen::Vector2d sigma_cm{1.0, 1.0};
  double rotation_rad = 0.0;
  BlobLabel label = BlobLabel::midfoot;
  Foot foot = Foot::left;

  double evaluate(const Eigen::Vector2d& p) const;
  /// Integral over the plane, kPa * cm^2.
  double mass() const;
};

/// Uniform rectangular load; models a calibration weight base.
struct Plate {
  Eigen::Vector2d min_cm = Eigen::Vector2d::Zero();
  Eigen::Vector2d max_cm = Eigen::Vector2d::Zero();
  double pressure_kpa = 0.0;

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min_cm.x() && p.x() <= max_cm.x() && p.y() >= min_cm.y() && p.y() <= max_cm.y();
  }
};

struct Sway {
  Eigen::Vector2d amplitude_cm = Eigen::Vector2d::Zero();
  double frequency_hz = 0.0;
};

struct Scene {
  std::vector<PressureBlob> blobs;
  std::vector<Plate> plates;
  Sway sway;
  double noise_sigma_kpa = 0.0;
  /// When set, blob amplitudes were rescaled so that total load equals this.
  std::optional<double> body_weight_kg;

  void validate() const;
  /// Pressure-weighted blob center per foot (no sway), or nullopt if the foot has no blobs.
  std::optional<Eigen::Vector2d> foot_center(Foot foot) const;
  /// Sum of blob masses in newtons (1 kPa * cm^2 = 0.1 N).
  double total_load_n() const;
};

/// Rescales blob amplitudes so the integrated load equals body_weight_kg * g.
void scale_to_body_weight(Scene& scene, double body_weight_kg);

/// Normal deviates from mt19937_64 via Box-Muller; unlike std::normal_distribution
/// the sequence is identical across standard libraries.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : engine_(seed) {}
  double operator()();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Noise-free scene pressure at time t, one value per position column.
Eigen::VectorXd render_scene(const Scene& scene, double t, const Eigen::Matrix2Xd& positions);

/// As above plus additive Gaussian noise, clipped at zero.
Eigen::VectorXd render_scene(const Scene& scene, double t, const Eigen::Matrix2Xd& positions, GaussianNoise& noise);

struct RawFrame {
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;
  std::uint8_t flags = 0;
  std::array<std::uint16_t, kChannels> counts{};

  friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

struct SimulatorConfig {
  SensorLayout layout;
  DividerConfig divider;
  SensorModel model;
  Scene scene;
  std::uint64_t seed = 1;
  double frame_rate_hz = 155.0;
};

/// Single-owner emulation of the mat and its acquisition chain.
class Simulator {
 public:
  explicit Simulator(SimulatorConfig config);

  const SimulatorConfig& config() const { return config_; }
  const Eigen::Matrix2Xd& positions() const { return positions_; }
  const std::vector<BranchState>& branch_states() const { return states_; }

  void set_scene(Scene scene);

  /// Ground-truth pressures at the sensors (noise included when configured).
  Eigen::VectorXd render(double t);

  /// Runs resistance -> divider -> ADC for every channel and stamps the frame.
  /// Throws DataError if t is earlier than the previous frame.
  RawFrame transduce(const Eigen::VectorXd& pressures_kpa, double t);

  RawFrame scan_frame(double t) { return transduce(render(t), t); }

  /// Next frame on the simulated clock: t = frames_emitted / frame_rate_hz.
  RawFrame next_frame();

  double time_of_frame(std::uint64_t index) const { return static_cast<double>(index) / config_.frame_rate_hz; }

 private:
  SimulatorConfig config_;
  Eigen::Matrix2Xd positions_;
  std::vector<BranchState> states_;
  GaussianNoise noise_;
  std::uint32_t next_seq_ = 0;
  std::optional<double> last_t_;
};

void to_json(nlohmann::json& j, const DividerConfig& cfg);
void from_json(const nlohmann::json& j, DividerConfig& cfg);
void to_json(nlohmann::json& j, const SensorModel& model);
void from_json(const nlohmann::json& j, SensorModel& model);
void to_json(nlohmann::json& j, const Scene& scene);
void from_json(const nlohmann::json& j, Scene& scene);

/// Parses a simulator config document: {"layout", "divider", "model", "scene", "seed"}.
/// Missing sections take defaults. Errors name the offending JSON path.
SimulatorConfig simulator_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimulatorConfig& config);

}  // namespace pmat
