#pragma once

#include <string>

#include <json.hpp>

#include "pmat/metrics.hpp"

namespace pmat {

enum class ReportFormat { json, csv, table };

ReportFormat report_format_from_string(const std::string& s);

void to_json(nlohmann::json& j, const MetricsReport& report);
void from_json(const nlohmann::json& j, MetricsReport& report);

/// Column names of the single-row CSV export, in order.
const std::vector<std::string>& report_csv_columns();

/// JSON (pretty, keys sorted), CSV (header + one row) or an aligned text
/// table with the rows MFP, Load %, Mean/Max/Load % Heel, Mean/Max/Load %
/// Metatarsal. When a callus is annotated the columns read
/// "Calloused Foot" / "Normal Foot", otherwise "Left" / "Right".
std::string export_report(const MetricsReport& report, ReportFormat format);

}  // namespace pmat
