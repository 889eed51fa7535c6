#include <functional>
#include <doctest.h>

#include <cmath>
#include <random>

#include "pmat/calibration.hpp"
#include "pmat/error.hpp"

using namespace pmat;

namespace {

std::vector<CalibrationSample> synthetic(const std::function<double(double)>& f, double d) {
  std::vector<CalibrationSample> s;
  for (double c = 100.0; c <= 3000.0; c += 20.0) {
    s.push_back({f(c) + d, c, Branch::loading});
    s.push_back({f(c) - d, c, Branch::unloading});
  }
  return s;
}

double f_quad(double c) { return 20.0 + 2e-4 * c * c + 0.05 * c; }

// Pressure that gives resistance r on the hysteresis-free curve, by bisection
// on the model law itself.
double pressure_for_mean_resistance(const SensorModel& m, double r) {
  double lo = 0.0, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_resistance(m, mid) > r ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("divider inversion") {
  DividerConfig cfg;
  CHECK_FALSE(invert_divider(cfg, 0.0).has_value());
  CHECK(*invert_divider(cfg, 4095.0) == doctest::Approx(0.0));
  CHECK(*invert_divider(cfg, 2048.0) == doctest::Approx(240.0).epsilon(1e-3));
  for (double r : {300.0, 1000.0, 10000.0}) {
    const int c = adc_quantize(cfg, divider_voltage(cfg, r));
    const double back = *invert_divider(cfg, c);
    const double step = std::abs(*invert_divider(cfg, c - 1) - *invert_divider(cfg, c + 1)) / 2.0;
    CHECK(std::abs(back - r) <= step);
  }
}

TEST_CASE("curve from identical branches") {
  const auto s = synthetic(f_quad, 0.0);
  const auto curve = build_curve(s);
  for (const auto& k : curve.knots()) CHECK(k.kpa == doctest::Approx(f_quad(k.count)).epsilon(1e-9));
  for (double c = 100.0; c <= 3000.0; c += 7.0) CHECK(std::abs(curve.evaluate(c).kpa - f_quad(c)) <= 0.05);
}

TEST_CASE("curve from offset branches lands on the mean") {
  for (double d : {2.0, 5.0, 15.0}) {
    const auto curve = build_curve(synthetic(f_quad, d));
    // Only the overlap of the two branches is covered by the mean curve.
    for (double c = curve.min_count(); c <= curve.max_count(); c += 5.0) {
      INFO("d=" << d << " c=" << c);
      REQUIRE(std::abs(curve.evaluate(c).kpa - f_quad(c)) <= d / 10.0);
    }
  }
}

TEST_CASE("curve evaluation semantics") {
  const auto curve = build_curve(synthetic(f_quad, 3.0));
  const auto& k = curve.knots();
  for (std::size_t i = 1; i < k.size(); ++i) {
    REQUIRE(k[i].count > k[i - 1].count);
    REQUIRE(k[i].kpa > k[i - 1].kpa);
  }
  for (const auto& knot : k) CHECK(curve.evaluate(knot.count).kpa == doctest::Approx(knot.kpa).epsilon(1e-12));

  const auto below = curve.evaluate(curve.min_count() - 1.0);
  CHECK(below.kpa == 0.0);
  CHECK(below.below_floor);
  const auto above = curve.evaluate(curve.max_count() + 1.0);
  CHECK(above.kpa == k.back().kpa);
  CHECK(above.saturated);

  double prev = -1.0;
  for (int c = 0; c <= 4095; ++c) {
    const double v = curve.lookup(static_cast<std::uint16_t>(c));
    REQUIRE(v >= prev);
    REQUIRE(v == curve.evaluate(c).kpa);
    prev = v;
  }

  RawFrame zero;
  const auto cal = calibrate(curve, zero);
  CHECK(cal.kpa.isZero());
  CHECK(cal.saturated_channels == 0);
}

TEST_CASE("random monotone curves never overshoot") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> step(0.1, 40.0);
  for (int t = 0; t < 30; ++t) {
    std::vector<CalibrationSample> s;
    double c = 50.0, p = 0.0;
    for (int i = 0; i < 30; ++i) {
      c += step(rng);
      p += step(rng) * (i % 5 == 0 ? 10.0 : 0.2);
      s.push_back({p, c, Branch::loading});
      s.push_back({p, c, Branch::unloading});
    }
    const auto curve = build_curve(s);
    const auto& k = curve.knots();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
      for (int j = 1; j < 10; ++j) {
        const double cc = k[i].count + (k[i + 1].count - k[i].count) * j / 10.0;
        const double v = curve.evaluate(cc).kpa;
        REQUIRE(v >= k[i].kpa);
        REQUIRE(v <= k[i + 1].kpa);
      }
    }
  }
}

TEST_CASE("build_curve errors") {
  SUBCASE("too few samples") {
    std::vector<CalibrationSample> s = {{0, 10, Branch::loading}, {1, 20, Branch::loading}, {0, 10, Branch::unloading}};
    CHECK_THROWS_AS(build_curve(s), DataError);
  }
  SUBCASE("non-monotone branch names the sample") {
    auto s = synthetic(f_quad, 0.0);
    // Two adjacent dips survive the 3-point median.
    s[40].observed_count = 50.0;
    s[42].observed_count = 50.0;
    CHECK_THROWS_WITH_AS(build_curve(s), doctest::Contains("kPa"), DataError);
  }
  SUBCASE("branches barely overlap") {
    std::vector<CalibrationSample> s;
    for (int i = 0; i < 10; ++i) s.push_back({i * 10.0, 100.0 + i * 10, Branch::loading});
    for (int i = 0; i < 10; ++i) s.push_back({80.0 + i * 10.0, 180.0 + i * 10, Branch::unloading});
    CHECK_THROWS_WITH_AS(build_curve(s), doctest::Contains("overlap"), DataError);
  }
}

TEST_CASE("csv and json") {
  const auto s = parse_calibration_csv("pressure_kpa,count,branch\n0,100,loading\n10,200,L\n20,300,L\n30,400,L\n"
                                       "30,420,U\n20,320,unloading\n10,220,U\n0,120,U\n");
  REQUIRE(s.size() == 8);
  CHECK(s[4].branch == Branch::unloading);
  const auto curve = build_curve(s);
  nlohmann::json j = curve;
  CHECK(j["method"] == "monotone-piecewise-cubic");
  const auto back = j.get<CalibrationCurve>();
  CHECK(back.id() == curve.id());
  for (int c = 0; c < 4096; c += 13) CHECK(back.lookup(c) == curve.lookup(c));

  CHECK_THROWS_AS(parse_calibration_csv("1,2\n"), DataError);
  CHECK_THROWS_AS(parse_calibration_csv("1,2,sideways\n"), DataError);
}

TEST_CASE("end-to-end recovery without hysteresis") {
  SimulatorConfig sim;
  sim.model.hysteresis_band = 0.0;
  const auto curve = build_curve(run_calibration_sweep(sim, default_sweep_pressures()));
  // Probe pressures that were not calibration points.
  std::vector<double> probe;
  for (double p = 10.0; p <= 600.0; p += 3.7) probe.push_back(p);
  const auto measured = run_calibration_sweep(sim, probe);
  for (const auto& m : measured) {
    const double got = curve.evaluate(m.observed_count).kpa;
    const double tol = std::max(2.0, 0.03 * m.applied_pressure_kpa);
    INFO("p=" << m.applied_pressure_kpa << " got=" << got);
    REQUIRE(std::abs(got - m.applied_pressure_kpa) <= tol);
  }
}

TEST_CASE("end-to-end recovery with hysteresis stays inside the band bound") {
  SimulatorConfig sim;
  sim.model.hysteresis_band = 0.05;
  const auto curve = build_curve(run_calibration_sweep(sim, default_sweep_pressures()));
  std::vector<double> probe;
  for (double p = 10.0; p <= 600.0; p += 3.7) probe.push_back(p);
  for (const auto& m : run_calibration_sweep(sim, probe)) {
    const double p = m.applied_pressure_kpa;
    const BranchState branch{0.0, m.branch == Branch::loading ? 1.0 : -1.0};
    // Pressure offset that the branch's resistance shift maps to through the
    // local slope of the mean law.
    const double shift = std::abs(pressure_for_mean_resistance(sim.model, resistance_of(sim.model, p, branch)) - p);
    const double tol = shift + std::max(2.0, 0.03 * p);
    const double got = curve.evaluate(m.observed_count).kpa;
    INFO("p=" << p << " got=" << got << " shift=" << shift);
    REQUIRE(std::abs(got - p) <= tol);
  }
}
