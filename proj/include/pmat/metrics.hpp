#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pmat/pipeline.hpp"

namespace pmat {

using Polygon = std::vector<Eigen::Vector2d>;

/// Even-odd rule; points exactly on an edge follow the half-open crossing test.
bool point_in_polygon(const Polygon& polygon, const Eigen::Vector2d& p);

/// No two non-adjacent edges touch and adjacent edges only share their vertex.
bool is_simple(const Polygon& polygon);

double signed_area(const Polygon& polygon);

struct Region {
  std::string label;
  Polygon polygon;
};

/// Labelled ROIs in cm. Valid labels: foot-L, foot-R, heel-L, heel-R,
/// metatarsal-L, metatarsal-R, callus-<n>.
struct RegionSet {
  std::vector<Region> regions;

  const Region* find(const std::string& label) const;
  /// Empty when valid; otherwise one message per problem.
  std::vector<std::string> validation_errors() const;
  void validate() const;
  /// "L" or "R" for the foot that contains a callus region; nullopt if none or unknown.
  std::optional<std::string> foot_of(const Region& region) const;
};

void to_json(nlohmann::json& j, const RegionSet& set);
void from_json(const nlohmann::json& j, RegionSet& set);

/// Sorted linear (column-major) indices of the cells whose centre lies inside.
using CellSet = std::vector<Eigen::Index>;
CellSet mask_cells(const PressureField& field, const Polygon& polygon);

struct MeanPressure {
  double kpa = 0.0;
  Eigen::Index contact_cells = 0;
  bool empty_contact = true;
};

/// Mean over the cells with P > contact_threshold.
MeanPressure mean_foot_pressure(const PressureField& field, const CellSet& cells, double contact_threshold_kpa);

double region_sum(const PressureField& field, const CellSet& cells);

/// Pressure-weighted centroid of cell centres; nullopt when the region carries no load.
std::optional<Eigen::Vector2d> center_of_pressure(const PressureField& field, const CellSet& cells);

/// 100 * foot sum / both-feet total; nullopt when total is not positive.
std::optional<double> load_percentage(const PressureField& field, const CellSet& foot, double both_feet_total);

struct RegionStats {
  double mean_kpa = 0.0;
  double max_kpa = 0.0;
  /// Share of the parent foot's load carried by the region.
  double load_pct = 0.0;
  bool empty_contact = true;
};

/// Throws DataError if `sub` has a cell outside `parent`.
RegionStats regional_stats(const PressureField& field, const CellSet& sub, const CellSet& parent,
                           double contact_threshold_kpa);

struct FootReport {
  double mfp_kpa = 0.0;
  bool empty_contact = true;
  double load_pct = 0.0;
  std::optional<Eigen::Vector2d> cop_cm;
  RegionStats heel;
  RegionStats metatarsal;
  std::vector<std::pair<std::string, RegionStats>> callus;
};

struct MetricsReport {
  FootReport left;
  FootReport right;
  std::optional<Eigen::Vector2d> resultant_cop_cm;
  double contact_threshold_kpa = 5.0;
  bool no_contact = true;
  /// "L" or "R" when a callus region is annotated on that foot.
  std::optional<std::string> calloused_foot;
};

inline constexpr double kDefaultContactThresholdKpa = 5.0;

/// Every table row for both feet. Requires foot, heel and metatarsal regions
/// on both sides.
MetricsReport full_report(const PressureField& field, const RegionSet& regions,
                          double contact_threshold_kpa = kDefaultContactThresholdKpa);

/// Seed ROIs: contact bounding box split at its vertical midline into feet,
/// heel = rear 30 % and metatarsal = 55-80 % of each foot's length (toes at +y).
RegionSet auto_split_feet(const PressureField& field, double contact_threshold_kpa = kDefaultContactThresholdKpa);

}  // namespace pmat
