#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "pmat/pipeline.hpp"

using namespace pmat;

namespace {

PressureField constant_field(Eigen::Index rows, Eigen::Index cols, double v) {
  PressureField f;
  f.values = PressureField::Array::Constant(rows, cols, v);
  return f;
}

double rms(const PressureField::Array& a) { return std::sqrt(a.square().mean()); }

// Sum of a few smooth bumps well inside the grid.
PressureField smooth_bumps(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PressureField f = constant_field(rows, cols, 0.0);
  for (int b = 0; b < 4; ++b) {
    const double cy = rows * (0.3 + 0.4 * u(rng));
    const double cx = cols * (0.3 + 0.4 * u(rng));
    const double s = 2.0 + 2.0 * u(rng);
    const double a = 50.0 + 200.0 * u(rng);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        f.values(r, c) += a * std::exp(-((r - cy) * (r - cy) + (c - cx) * (c - cx)) / (2 * s * s));
      }
    }
  }
  return f;
}

SimulatorConfig load_config(const std::string& name) {
  std::ifstream in(std::string(PMAT_SOURCE_DIR) + "/scenes/" + name);
  REQUIRE(in);
  nlohmann::json j;
  in >> j;
  return simulator_config_from_json(j);
}

struct Component {
  double mass = 0.0;
  Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
  Eigen::Vector2d centroid() const { return weighted / mass; }
};

// 4-connected components above a threshold, by flood fill.
std::vector<Component> components(const PressureField& f, double threshold) {
  const Eigen::Index rows = f.rows(), cols = f.cols();
  std::vector<int> label(static_cast<std::size_t>(rows * cols), -1);
  std::vector<Component> out;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index c0 = 0; c0 < cols; ++c0) {
    for (Eigen::Index r0 = 0; r0 < rows; ++r0) {
      if (f.values(r0, c0) <= threshold || label[c0 * rows + r0] >= 0) continue;
      Component comp;
      stack = {{r0, c0}};
      label[c0 * rows + r0] = static_cast<int>(out.size());
      while (!stack.empty()) {
        auto [r, c] = stack.back();
        stack.pop_back();
        comp.mass += f.values(r, c);
        comp.weighted += f.values(r, c) * f.cell_center(r, c);
        const std::pair<Eigen::Index, Eigen::Index> nb[] = {{r + 1, c}, {r - 1, c}, {r, c + 1}, {r, c - 1}};
        for (auto [rr, cc] : nb) {
          if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
          if (f.values(rr, cc) <= threshold || label[cc * rows + rr] >= 0) continue;
          label[cc * rows + rr] = static_cast<int>(out.size());
          stack.push_back({rr, cc});
        }
      }
      out.push_back(comp);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("averaging") {
  const auto f = constant_field(6, 7, 42.5);
  std::vector<PressureField> one{f};
  CHECK((average_frames<double>(one).values == f.values).all());

  std::vector<PressureField> many(50, f);
  const auto avg = average_frames<double>(many);
  CHECK((avg.values == 42.5).all());
  CHECK(avg.frames_averaged == 50);
  CHECK(avg.provenance == std::vector<Stage>{Stage::raw, Stage::averaged});

  SUBCASE("noise falls by sqrt(50)") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, 4.0);
    std::vector<PressureField> frames;
    for (int i = 0; i < 50; ++i) {
      PressureField g = constant_field(40, 40, 100.0);
      for (Eigen::Index k = 0; k < g.values.size(); ++k) g.values(k) += noise(rng);
      frames.push_back(g);
    }
    const auto a = average_frames<double>(frames);
    const double resid = rms(a.values - 100.0);
    CHECK(std::abs(resid / (4.0 / std::sqrt(50.0)) - 1.0) <= 0.2);
  }

  SUBCASE("shape mismatch") {
    std::vector<PressureField> bad{f, constant_field(6, 8, 1.0)};
    CHECK_THROWS_AS(average_frames<double>(bad), DataError);
  }
}

TEST_CASE("gaussian kernel") {
  const SmoothingSpec spec;
  const auto k = gaussian_kernel(spec);
  CHECK(std::abs(k.sum() - 1.0) <= 1e-12);
  const auto raw = gaussian_kernel_raw(spec);
  CHECK(raw(2, 2) / raw(0, 0) == doctest::Approx(std::exp(6.25)).epsilon(1e-12));
  CHECK(raw(2, 2) / raw(0, 0) == doctest::Approx(518.01).epsilon(1e-5));
  CHECK(raw(2, 2) == doctest::Approx(1.0 / (2.0 * 3.14159265358979 * 0.64)));
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      CHECK(k(y, x) == k(x, y));
      CHECK(k(y, x) == k(4 - y, x));
      CHECK(k(y, x) == k(y, 4 - x));
      if (x != 2 || y != 2) CHECK(k(y, x) < k(2, 2));
    }
  }
  CHECK_THROWS_AS(gaussian_kernel(SmoothingSpec{4, 0.8}), DataError);
  CHECK_THROWS_AS(gaussian_kernel(SmoothingSpec{5, 0.0}), DataError);
}

TEST_CASE("upsampling") {
  SUBCASE("factor 1 is identity") {
    std::mt19937 rng(1);
    const auto f = smooth_bumps(8, 9, rng);
    const auto u = upsample_spline(f, 1);
    CHECK((u.values == f.values).all());
  }

  SUBCASE("constants and ramps") {
    PressureField ramp = constant_field(12, 17, 0.0);
    for (Eigen::Index c = 0; c < 17; ++c) {
      for (Eigen::Index r = 0; r < 12; ++r) ramp.values(r, c) = 30.0 + 2.5 * r + 1.25 * c;
    }
    ramp.pitch_cm = 0.5;
    ramp.origin_cm = {1.0, 2.0};
    const auto u = upsample_spline(ramp, 10);
    REQUIRE(u.rows() == 120);
    REQUIRE(u.cols() == 170);
    CHECK(u.pitch_cm == doctest::Approx(0.05));
    double err = 0.0;
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      for (Eigen::Index r = 0; r < u.rows(); ++r) {
        // Evaluate the analytic ramp at the output cell's position.
        const Eigen::Vector2d idx = (u.cell_center(r, c) - ramp.origin_cm) / ramp.pitch_cm;
        err = std::max(err, std::abs(u.values(r, c) - (30.0 + 2.5 * idx.y() + 1.25 * idx.x())));
      }
    }
    CHECK(err <= 1e-9);
    CHECK(u.clamped_cells == 0);

    const auto k = upsample_spline(constant_field(5, 6, 7.0), 10);
    CHECK(((k.values - 7.0).abs() <= 1e-9).all());
  }

  SUBCASE("odd factor reproduces input samples") {
    std::mt19937 rng(2);
    const auto f = smooth_bumps(10, 10, rng);
    const auto u = upsample_spline(f, 3);
    for (Eigen::Index c = 0; c < 10; ++c) {
      for (Eigen::Index r = 0; r < 10; ++r) CHECK(u.values(3 * r + 1, 3 * c + 1) == doctest::Approx(f.values(r, c)).epsilon(1e-12));
    }
  }

  SUBCASE("mass scales with factor squared") {
    std::mt19937 rng(3);
    for (int t = 0; t < 10; ++t) {
      const auto f = smooth_bumps(32, 64, rng);
      const auto u = upsample_spline(f, 10);
      CHECK(std::abs(u.values.sum() / (100.0 * f.values.sum()) - 1.0) <= 0.005);
    }
  }

  SUBCASE("negative overshoot is clamped and counted") {
    PressureField step = constant_field(8, 8, 0.0);
    step.values.block(0, 4, 8, 4) = 100.0;
    const auto u = upsample_spline(step, 10);
    CHECK(u.values.minCoeff() >= 0.0);
    CHECK(u.clamped_cells > 0);
  }

  SUBCASE("small fields fall back to bilinear") {
    const auto u = upsample_spline(constant_field(3, 3, 1.0), 4);
    CHECK(u.rows() == 12);
    CHECK(u.notes.size() == 1);
  }
}

TEST_CASE("smoothing") {
  SUBCASE("constant unchanged") {
    const auto s = smooth(constant_field(20, 30, 12.0));
    CHECK(((s.values - 12.0).abs() <= 1e-12).all());
  }

  SUBCASE("impulse response") {
    PressureField f = constant_field(21, 21, 0.0);
    f.values(10, 10) = 250.0;
    const auto s = smooth(f);
    CHECK(std::abs(s.values.sum() - 250.0) <= 1e-9);
    const auto k = gaussian_kernel(SmoothingSpec{});
    CHECK(((s.values.block(8, 8, 5, 5) - 250.0 * k).abs() <= 1e-12).all());
  }

  SUBCASE("twice at sigma equals once at sigma*sqrt(2)") {
    std::mt19937 rng(4);
    const auto f = smooth_bumps(60, 60, rng);
    const auto twice = smooth(smooth(f));
    const auto once = smooth(f, SmoothingSpec{5, 0.8 * std::sqrt(2.0)});
    CHECK(rms(twice.values - once.values) / rms(once.values) <= 0.02);
  }

  SUBCASE("linearity") {
    std::mt19937 rng(5);
    const auto a = smooth_bumps(20, 20, rng);
    const auto b = smooth_bumps(20, 20, rng);
    PressureField ab = a;
    ab.values = 2.0 * a.values + 3.0 * b.values;
    const PressureField::Array lhs = smooth(ab).values;
    const PressureField::Array rhs = 2.0 * smooth(a).values + 3.0 * smooth(b).values;
    CHECK(((lhs - rhs).abs() <= 1e-9).all());
  }
}

TEST_CASE("stage order") {
  const auto f = constant_field(10, 10, 1.0);
  const auto up = upsample_spline(f, 2);
  const auto sm = smooth(up);
  CHECK(sm.provenance == std::vector<Stage>{Stage::raw, Stage::upsampled, Stage::smoothed});
  CHECK_THROWS_AS(upsample_spline(sm, 2), StageOrderError);
  std::vector<PressureField> v{up};
  CHECK_THROWS_AS(average_frames<double>(v), StageOrderError);
  CHECK(stage_from_string("upsampled") == Stage::upsampled);
  CHECK_THROWS_AS(stage_from_string("blurred"), DataError);
}

TEST_CASE("process_capture") {
  SimulatorConfig cfg = load_config("standing.json");
  SimulatorConfig calib_cfg = cfg;
  const auto curve = build_curve(run_calibration_sweep(calib_cfg, default_sweep_pressures()));

  SUBCASE("zero scene") {
    SimulatorConfig zero = cfg;
    zero.scene = Scene{};
    Simulator sim(zero);
    std::vector<RawFrame> frames;
    for (int i = 0; i < 50; ++i) frames.push_back(sim.next_frame());
    const auto field = process_capture(frames, curve, zero.layout);
    CHECK(field.values.isZero());
    CHECK(field.provenance == std::vector<Stage>{Stage::raw, Stage::averaged, Stage::upsampled, Stage::smoothed});
    CHECK(field.rows() == 320);
    CHECK(field.cols() == 640);
    CHECK(field.frames_averaged == 50);
  }

  SUBCASE("two feet land where the scene put them") {
    Simulator sim(cfg);
    std::vector<RawFrame> frames;
    for (int i = 0; i < 50; ++i) frames.push_back(sim.next_frame());
    const auto field = process_capture(frames, curve, cfg.layout);
    auto comps = components(field, 5.0);
    REQUIRE(comps.size() >= 2);
    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) { return a.mass > b.mass; });
    comps.resize(2);
    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) { return a.centroid().x() < b.centroid().x(); });
    const auto left = *cfg.scene.foot_center(Foot::left);
    const auto right = *cfg.scene.foot_center(Foot::right);
    INFO("left " << comps[0].centroid().transpose() << " vs " << left.transpose());
    INFO("right " << comps[1].centroid().transpose() << " vs " << right.transpose());
    CHECK((comps[0].centroid() - left).norm() <= 1.0);
    CHECK((comps[1].centroid() - right).norm() <= 1.0);
    CHECK(field.values.minCoeff() >= 0.0);
  }
}

TEST_CASE("block downsample") {
  PressureField f = constant_field(20, 40, 3.0);
  f.pitch_cm = 0.05;
  const auto d = block_downsample(f, 10);
  CHECK(d.rows() == 2);
  CHECK(d.cols() == 4);
  CHECK(d.pitch_cm == doctest::Approx(0.5));
  CHECK((d.values == 3.0).all());
}
