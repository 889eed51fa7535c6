#include <doctest.h>

#include <cmath>
#include <random>

#include "pmat/metrics.hpp"
#include "pmat/report_io.hpp"

using namespace pmat;

namespace {

Polygon rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

PressureField grid8(std::mt19937& rng) {
  // Loaded cells stay well above the contact threshold so scaling never moves
  // a cell across it.
  std::uniform_real_distribution<double> u(20.0, 300.0);
  std::bernoulli_distribution zero(0.25);
  PressureField f;
  f.values.resize(8, 8);
  for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values(i) = zero(rng) ? 0.0 : u(rng);
  f.pitch_cm = 1.0;
  f.origin_cm = {0.5, 0.5};
  return f;
}

// Ray casting by winding number, written independently of the library test.
bool inside_oracle(const Polygon& poly, double x, double y) {
  int winding = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const double cross = (b.x() - a.x()) * (y - a.y()) - (x - a.x()) * (b.y() - a.y());
    if (a.y() <= y && b.y() > y && cross > 0) ++winding;
    if (a.y() > y && b.y() <= y && cross < 0) --winding;
  }
  return winding != 0;
}

struct Brute {
  double n = 0, sum = 0, contact_sum = 0, max = 0, sx = 0, sy = 0;
};

Brute brute(const PressureField& f, const Polygon& poly, double threshold) {
  Brute b;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const double x = 0.5 + c, y = 0.5 + r;
      if (!inside_oracle(poly, x, y)) continue;
      const double p = f.values(r, c);
      b.sum += p;
      b.sx += p * x;
      b.sy += p * y;
      if (p > threshold) {
        b.n += 1;
        b.contact_sum += p;
        b.max = std::max(b.max, p);
      }
    }
  }
  return b;
}

RegionSet demo_regions() {
  RegionSet set;
  set.regions = {{"foot-L", rect(0.1, 0.1, 3.9, 7.9)},    {"heel-L", rect(0.2, 0.2, 3.8, 2.9)},
                 {"metatarsal-L", rect(0.2, 4.1, 3.8, 6.1)}, {"foot-R", rect(4.1, 0.1, 7.9, 7.9)},
                 {"heel-R", rect(4.2, 0.2, 7.8, 2.9)},    {"metatarsal-R", rect(4.2, 4.1, 7.8, 6.1)}};
  return set;
}

}  // namespace

TEST_CASE("point in polygon") {
  const Polygon sq = rect(0, 0, 2, 2);
  CHECK(point_in_polygon(sq, {1, 1}));
  CHECK_FALSE(point_in_polygon(sq, {3, 1}));
  const Polygon concave = {{0, 0}, {4, 0}, {4, 4}, {2, 1}, {0, 4}};
  CHECK_FALSE(point_in_polygon(concave, {2, 3}));
  CHECK(point_in_polygon(concave, {0.5, 1}));
  CHECK(is_simple(concave));
  CHECK_FALSE(is_simple({{0, 0}, {2, 2}, {2, 0}, {0, 2}}));
  CHECK(signed_area(sq) == 4.0);

  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 5.0);
  for (int i = 0; i < 5000; ++i) {
    const Eigen::Vector2d p(u(rng), u(rng));
    REQUIRE(point_in_polygon(concave, p) == inside_oracle(concave, p.x(), p.y()));
  }
}

TEST_CASE("mask_cells") {
  PressureField f;
  f.values = PressureField::Array::Zero(8, 8);
  f.pitch_cm = 1.0;
  f.origin_cm = {0.5, 0.5};
  CHECK(mask_cells(f, rect(-1, -1, 9, 9)).size() == 64);
  CHECK(mask_cells(f, rect(0.6, 0.6, 0.9, 0.9)).empty());
  CHECK(mask_cells(f, rect(1.1, 2.1, 4.0, 5.0)).size() == 9);
  CHECK_THROWS_AS(mask_cells(f, {{0, 0}, {1, 1}}), DataError);
  const auto cells = mask_cells(f, rect(1.1, 2.1, 4.0, 5.0));
  CHECK(std::is_sorted(cells.begin(), cells.end()));
}

TEST_CASE("metrics equal the brute-force oracle on random 8x8 fields") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> coord(0.05, 7.95);
  for (int t = 0; t < 200; ++t) {
    const auto f = grid8(rng);
    // Random triangle and random rectangle.
    Polygon tri = {{coord(rng), coord(rng)}, {coord(rng), coord(rng)}, {coord(rng), coord(rng)}};
    if (std::abs(signed_area(tri)) < 1.0) continue;
    double x0 = coord(rng), x1 = coord(rng), y0 = coord(rng), y1 = coord(rng);
    Polygon box = rect(std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1));
    for (const Polygon& poly : {tri, box}) {
      const auto cells = mask_cells(f, poly);
      const Brute b = brute(f, poly, 5.0);
      const auto mfp = mean_foot_pressure(f, cells, 5.0);
      REQUIRE(static_cast<double>(mfp.contact_cells) == b.n);
      if (b.n > 0) {
        REQUIRE(std::abs(mfp.kpa - b.contact_sum / b.n) <= 1e-12 * b.contact_sum);
      } else {
        REQUIRE(mfp.empty_contact);
      }
      REQUIRE(std::abs(region_sum(f, cells) - b.sum) <= 1e-12 * std::max(1.0, b.sum));
      const auto cop = center_of_pressure(f, cells);
      if (b.sum > 0) {
        REQUIRE(cop.has_value());
        REQUIRE(std::abs(cop->x() - b.sx / b.sum) <= 1e-12 * 8);
        REQUIRE(std::abs(cop->y() - b.sy / b.sum) <= 1e-12 * 8);
      } else {
        REQUIRE_FALSE(cop.has_value());
      }
    }
  }
}

TEST_CASE("center of pressure and load split") {
  PressureField f;
  f.values = PressureField::Array::Zero(1, 4);
  f.pitch_cm = 1.0;
  f.origin_cm = {0.0, 0.0};
  f.values(0, 0) = 10.0;
  f.values(0, 3) = 20.0;
  const CellSet all = {0, 1, 2, 3};
  CHECK(center_of_pressure(f, all)->x() == doctest::Approx(2.0));

  PressureField g;
  g.values = PressureField::Array::Zero(1, 2);
  g.pitch_cm = 1.0;
  g.values(0, 0) = 3.0;
  g.values(0, 1) = 1.0;
  CHECK(*load_percentage(g, {0}, 4.0) == doctest::Approx(75.0));
  CHECK(*load_percentage(g, {1}, 4.0) == doctest::Approx(25.0));
  CHECK_FALSE(load_percentage(g, {0}, 0.0).has_value());
}

TEST_CASE("mean foot pressure contact rule") {
  PressureField f;
  f.values = PressureField::Array::Zero(2, 2);
  f.values.row(0) = 200.0;
  CHECK(mean_foot_pressure(f, {0, 1, 2, 3}, 5.0).kpa == 200.0);
  f.values = 100.0;
  CHECK(mean_foot_pressure(f, {0, 1, 2, 3}, 5.0).kpa == 100.0);
}

TEST_CASE("full report invariants") {
  std::mt19937 rng(12);
  const RegionSet regions = demo_regions();
  for (int t = 0; t < 50; ++t) {
    const auto f = grid8(rng);
    const auto r = full_report(f, regions);
    REQUIRE(std::abs(r.left.load_pct + r.right.load_pct - 100.0) <= 1e-9);
    for (const FootReport* foot : {&r.left, &r.right}) {
      REQUIRE(foot->heel.load_pct >= 0.0);
      REQUIRE(foot->heel.load_pct <= 100.0);
      REQUIRE(foot->metatarsal.load_pct <= 100.0);
    }
    // CoP inside the foot's bounding box.
    REQUIRE(r.left.cop_cm->x() >= 0.1);
    REQUIRE(r.left.cop_cm->x() <= 3.9);
    REQUIRE(r.right.cop_cm->x() >= 4.1);

    SUBCASE("scale equivariance") {
      PressureField k = f;
      k.values *= 3.5;
      const auto s = full_report(k, regions);
      CHECK(s.left.mfp_kpa == doctest::Approx(3.5 * r.left.mfp_kpa).epsilon(1e-12));
      CHECK(s.right.metatarsal.max_kpa == doctest::Approx(3.5 * r.right.metatarsal.max_kpa).epsilon(1e-12));
      CHECK(s.left.load_pct == doctest::Approx(r.left.load_pct).epsilon(1e-12));
      CHECK(s.right.heel.load_pct == doctest::Approx(r.right.heel.load_pct).epsilon(1e-12));
      CHECK((*s.left.cop_cm - *r.left.cop_cm).norm() <= 1e-12 * 8);
      CHECK((*s.resultant_cop_cm - *r.resultant_cop_cm).norm() <= 1e-12 * 8);
    }
  }
}

TEST_CASE("translation equivariance") {
  std::mt19937 rng(13);
  const auto f = grid8(rng);
  const RegionSet regions = demo_regions();
  const Eigen::Vector2d shift(3.25, -1.5);
  PressureField g = f;
  g.origin_cm += shift;
  RegionSet moved = regions;
  for (auto& reg : moved.regions) {
    for (auto& v : reg.polygon) v += shift;
  }
  const auto a = full_report(f, regions);
  const auto b = full_report(g, moved);
  CHECK((*b.left.cop_cm - *a.left.cop_cm - shift).norm() <= 1e-9);
  CHECK((*b.resultant_cop_cm - *a.resultant_cop_cm - shift).norm() <= 1e-9);
  CHECK(b.left.mfp_kpa == a.left.mfp_kpa);
  CHECK(b.right.heel.load_pct == a.right.heel.load_pct);
}

TEST_CASE("partition additivity") {
  std::mt19937 rng(14);
  const auto f = grid8(rng);
  const auto foot = mask_cells(f, rect(0.1, 0.1, 7.9, 7.9));
  const auto a = mask_cells(f, rect(0.1, 0.1, 7.9, 3.0));
  const auto b = mask_cells(f, rect(0.1, 3.0, 7.9, 5.2));
  const auto c = mask_cells(f, rect(0.1, 5.2, 7.9, 7.9));
  REQUIRE(a.size() + b.size() + c.size() == foot.size());
  double total = 0.0;
  for (const auto* s : {&a, &b, &c}) total += regional_stats(f, *s, foot, 5.0).load_pct;
  CHECK(std::abs(total - 100.0) <= 1e-9);
  CHECK(regional_stats(f, foot, foot, 5.0).load_pct == doctest::Approx(100.0));
  const auto outside = mask_cells(f, rect(-1, -1, 9, 9));
  CHECK_THROWS_AS(regional_stats(f, outside, a, 5.0), DataError);
}

TEST_CASE("zero field gives no-contact") {
  PressureField f;
  f.values = PressureField::Array::Zero(8, 8);
  f.pitch_cm = 1.0;
  f.origin_cm = {0.5, 0.5};
  const auto r = full_report(f, demo_regions());
  CHECK(r.no_contact);
  CHECK(r.left.empty_contact);
  CHECK(r.left.mfp_kpa == 0.0);
  CHECK_FALSE(r.resultant_cop_cm.has_value());
}

TEST_CASE("region validation") {
  RegionSet missing = demo_regions();
  missing.regions.pop_back();
  CHECK_THROWS_WITH_AS(full_report(PressureField{PressureField::Array::Zero(8, 8)}, missing),
                       doctest::Contains("metatarsal-R"), DataError);

  RegionSet bad_label = demo_regions();
  bad_label.regions.push_back({"toe-L", rect(1, 7, 2, 7.5)});
  CHECK_FALSE(bad_label.validation_errors().empty());

  RegionSet overlap = demo_regions();
  overlap.regions[3].polygon = rect(3.0, 0.1, 7.9, 7.9);
  CHECK_FALSE(overlap.validation_errors().empty());

  RegionSet escaped = demo_regions();
  escaped.regions[1].polygon = rect(0.2, 0.2, 5.0, 2.9);
  CHECK_FALSE(escaped.validation_errors().empty());

  RegionSet callus = demo_regions();
  callus.regions.push_back({"callus-1", rect(5, 4.5, 6, 5.5)});
  CHECK(callus.validation_errors().empty());
  CHECK(callus.foot_of(callus.regions.back()) == "R");
}

TEST_CASE("region GeoJSON round trip") {
  const RegionSet set = demo_regions();
  nlohmann::json j = set;
  CHECK(j["type"] == "FeatureCollection");
  CHECK(j["features"].size() == 6);
  const auto& ring = j["features"][0]["geometry"]["coordinates"][0];
  CHECK(ring.front() == ring.back());
  const auto back = j.get<RegionSet>();
  REQUIRE(back.regions.size() == 6);
  CHECK(back.regions[2].polygon == set.regions[2].polygon);
}

TEST_CASE("report exports") {
  std::mt19937 rng(15);
  RegionSet regions = demo_regions();
  regions.regions.push_back({"callus-1", rect(5, 4.5, 6, 5.5)});
  const auto r = full_report(grid8(rng), regions);
  CHECK(r.calloused_foot == "R");

  const auto table = export_report(r, ReportFormat::table);
  const std::vector<std::string> order = {"MFP",
                                          "Load %",
                                          "Mean Heel Pressure",
                                          "Max Heel Pressure",
                                          "Load % on Heel",
                                          "Mean Metatarsal Pressure",
                                          "Max Metatarsal Pressure",
                                          "Load % on Metatarsal"};
  std::size_t pos = table.find("Calloused Foot");
  CHECK(pos != std::string::npos);
  CHECK(table.find("Normal Foot") != std::string::npos);
  for (const auto& row : order) {
    const auto at = table.find("\n" + row + " ", pos);
    REQUIRE(at != std::string::npos);
    pos = at + 1;
  }

  const auto csv = export_report(r, ReportFormat::csv);
  const auto header_end = csv.find('\n');
  CHECK(std::count(csv.begin(), csv.begin() + static_cast<long>(header_end), ',') + 1 ==
        static_cast<long>(report_csv_columns().size()));

  const auto json = nlohmann::json::parse(export_report(r, ReportFormat::json));
  const auto back = json.get<MetricsReport>();
  CHECK(back.left.mfp_kpa == r.left.mfp_kpa);
  CHECK(back.calloused_foot == r.calloused_foot);
  CHECK(json["feet"]["R"].contains("callus"));
}

TEST_CASE("table prints two decimals and unitless MFP") {
  MetricsReport r;
  r.left.mfp_kpa = 102.2749;
  r.right.mfp_kpa = 98.0;
  const auto table = export_report(r, ReportFormat::table);
  CHECK(table.find("MFP                         102.27          98.00\n") != std::string::npos);
}
