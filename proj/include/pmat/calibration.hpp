#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pmat/sensor_sim.hpp"

namespace pmat {

/// Sensor resistance implied by an ADC count; nullopt for count 0 (open circuit).
std::optional<double> invert_divider(const DividerConfig& cfg, double count);

enum class Branch { loading, unloading };

struct CalibrationSample {
  double applied_pressure_kpa = 0.0;
  /// Mean count over the sensors under the weight base; fractional when averaged.
  double observed_count = 0.0;
  Branch branch = Branch::loading;
};

/// Monotone counts -> kPa mapping. Knots are strictly increasing in both
/// coordinates; the interpolant is piecewise cubic Hermite with slopes limited
/// by the Fritsch-Carlson conditions, so it never overshoots between knots.
class CalibrationCurve {
 public:
  struct Knot {
    double count;
    double kpa;
  };

  struct Value {
    double kpa = 0.0;
    bool saturated = false;
    bool below_floor = false;
  };

  CalibrationCurve() = default;
  CalibrationCurve(std::vector<Knot> knots, DividerConfig divider);

  const std::vector<Knot>& knots() const { return knots_; }
  const DividerConfig& divider() const { return divider_; }
  double min_count() const { return knots_.front().count; }
  double max_count() const { return knots_.back().count; }
  bool empty() const { return knots_.empty(); }
  static constexpr const char* method() { return "monotone-piecewise-cubic"; }

  /// Below the first knot reads 0 kPa (no contact); above the last knot
  /// clamps to the last knot's pressure and reports saturation.
  Value evaluate(double count) const;

  /// Table lookup for integer counts; same result as evaluate().
  double lookup(std::uint16_t count) const { return lut_[count]; }
  bool saturates(std::uint16_t count) const { return count > max_count(); }

  /// Stable short identifier derived from the knot values.
  std::string id() const;

 private:
  void build_lut();

  std::vector<Knot> knots_;
  std::vector<double> slopes_;
  DividerConfig divider_;
  std::vector<double> lut_;
};

/// Mean curve through a loading and an unloading branch: each branch is
/// median-filtered and checked for monotonicity, both are read as kPa by
/// linear interpolation on the shared count grid, averaged point by point, and
/// a monotone cubic is fitted through the result.
CalibrationCurve build_curve(const std::vector<CalibrationSample>& samples, const DividerConfig& divider = {});

struct CalibratedFrame {
  Eigen::VectorXd kpa;
  int saturated_channels = 0;
};

/// Per-channel evaluation of the curve; no spatial coupling.
CalibratedFrame calibrate(const CalibrationCurve& curve, const RawFrame& frame);
void calibrate_into(const CalibrationCurve& curve, const RawFrame& frame, Eigen::VectorXd& out);

/// Emulates the weight-bearing base: a uniform plate over `base_cm2` of one
/// panel, swept up through `pressures_kpa` and back down. Each step is scanned
/// `frames_per_step` times; the sample count is the mean over covered sensors
/// and frames. Before the unloading pass the plate is pushed `overshoot_kpa`
/// past the top step (unrecorded) so the unloading branch is fully engaged by
/// the time its first sample is taken.
struct CalibrationRig {
  double base_cm2 = 100.0;
  int frames_per_step = 1;
  double overshoot_kpa = 100.0;
};

std::vector<CalibrationSample> run_calibration_sweep(const SimulatorConfig& sim, const std::vector<double>& pressures_kpa,
                                                     const CalibrationRig& rig = {});

/// Default sweep: 0 to 700 kPa in 1 kPa steps.
std::vector<double> default_sweep_pressures();

/// Parses CSV rows "pressure_kpa,count,branch" (header optional; branch is
/// loading/unloading or L/U).
std::vector<CalibrationSample> parse_calibration_csv(const std::string& text);

void to_json(nlohmann::json& j, const CalibrationCurve& curve);
void from_json(const nlohmann::json& j, CalibrationCurve& curve);

}  // namespace pmat
