#include "pmat/report_io.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include "pmat/error.hpp"
#include "pmat/json_util.hpp"

namespace pmat {

namespace {

nlohmann::json stats_json(const RegionStats& s) {
  return {{"mean_kpa", s.mean_kpa}, {"max_kpa", s.max_kpa}, {"load_pct", s.load_pct}, {"empty_contact", s.empty_contact}};
}

RegionStats stats_from(const nlohmann::json& j) {
  RegionStats s;
  s.mean_kpa = j.at("mean_kpa").get<double>();
  s.max_kpa = j.at("max_kpa").get<double>();
  s.load_pct = j.at("load_pct").get<double>();
  s.empty_contact = j.value("empty_contact", false);
  return s;
}

nlohmann::json optional_point(const std::optional<Eigen::Vector2d>& p) {
  return p ? nlohmann::json(*p) : nlohmann::json(nullptr);
}

std::optional<Eigen::Vector2d> optional_point_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<Eigen::Vector2d>();
}

nlohmann::json foot_json(const FootReport& f) {
  auto callus = nlohmann::json::array();
  for (const auto& [label, s] : f.callus) {
    auto c = stats_json(s);
    c["label"] = label;
    callus.push_back(c);
  }
  return {{"mfp_kpa", f.mfp_kpa},
          {"empty_contact", f.empty_contact},
          {"load_pct", f.load_pct},
          {"cop_cm", optional_point(f.cop_cm)},
          {"heel", stats_json(f.heel)},
          {"metatarsal", stats_json(f.metatarsal)},
          {"callus", callus}};
}

FootReport foot_from(const nlohmann::json& j) {
  FootReport f;
  f.mfp_kpa = j.at("mfp_kpa").get<double>();
  f.empty_contact = j.value("empty_contact", false);
  f.load_pct = j.at("load_pct").get<double>();
  f.cop_cm = optional_point_from(j.at("cop_cm"));
  f.heel = stats_from(j.at("heel"));
  f.metatarsal = stats_from(j.at("metatarsal"));
  if (j.contains("callus")) {
    for (const auto& c : j.at("callus")) f.callus.emplace_back(c.at("label").get<std::string>(), stats_from(c));
  }
  return f;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "table") return ReportFormat::table;
  throw DataError("unknown report format '" + s + "' (expected json, csv or table)");
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"contact_threshold_kpa", r.contact_threshold_kpa},
       {"no_contact", r.no_contact},
       {"calloused_foot", r.calloused_foot ? nlohmann::json(*r.calloused_foot) : nlohmann::json(nullptr)},
       {"resultant_cop_cm", optional_point(r.resultant_cop_cm)},
       {"feet", {{"L", foot_json(r.left)}, {"R", foot_json(r.right)}}}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  try {
    MetricsReport out;
    out.contact_threshold_kpa = j.at("contact_threshold_kpa").get<double>();
    out.no_contact = j.value("no_contact", false);
    if (j.contains("calloused_foot") && !j.at("calloused_foot").is_null()) {
      out.calloused_foot = j.at("calloused_foot").get<std::string>();
    }
    out.resultant_cop_cm = optional_point_from(j.at("resultant_cop_cm"));
    out.left = foot_from(j.at("feet").at("L"));
    out.right = foot_from(j.at("feet").at("R"));
    r = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report json: ") + e.what());
  }
}

const std::vector<std::string>& report_csv_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c;
    for (const char* side : {"left", "right"}) {
      const std::string s = side;
      for (const char* f : {"mfp_kpa", "load_pct", "heel_mean_kpa", "heel_max_kpa", "heel_load_pct",
                            "metatarsal_mean_kpa", "metatarsal_max_kpa", "metatarsal_load_pct", "cop_x_cm",
                            "cop_y_cm"}) {
        c.push_back(s + "_" + f);
      }
    }
    c.insert(c.end(), {"resultant_cop_x_cm", "resultant_cop_y_cm", "contact_threshold_kpa", "calloused_foot"});
    return c;
  }();
  return cols;
}

std::string export_report(const MetricsReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::json:
      return nlohmann::json(r).dump(2) + "\n";

    case ReportFormat::csv: {
      std::vector<std::string> row;
      auto point = [&](const std::optional<Eigen::Vector2d>& p) {
        row.push_back(p ? csv_number(p->x()) : "");
        row.push_back(p ? csv_number(p->y()) : "");
      };
      for (const FootReport* f : {&r.left, &r.right}) {
        for (double v : {f->mfp_kpa, f->load_pct, f->heel.mean_kpa, f->heel.max_kpa, f->heel.load_pct,
                         f->metatarsal.mean_kpa, f->metatarsal.max_kpa, f->metatarsal.load_pct}) {
          row.push_back(csv_number(v));
        }
        point(f->cop_cm);
      }
      point(r.resultant_cop_cm);
      row.push_back(csv_number(r.contact_threshold_kpa));
      row.push_back(r.calloused_foot.value_or(""));
      std::string out;
      const auto& cols = report_csv_columns();
      for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
      out += "\n";
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
      return out + "\n";
    }

    case ReportFormat::table: {
      const bool callus = r.calloused_foot.has_value();
      const FootReport& a = (callus && *r.calloused_foot == "R") ? r.right : r.left;
      const FootReport& b = (callus && *r.calloused_foot == "R") ? r.left : r.right;
      const std::string ha = callus ? "Calloused Foot" : "Left";
      const std::string hb = callus ? "Normal Foot" : "Right";
      std::ostringstream os;
      auto line = [&](const std::string& name, const std::string& va, const std::string& vb) {
        os << std::left << std::setw(28) << name << std::setw(16) << va << vb << "\n";
      };
      auto kpa = [](double v) { return fixed2(v) + "kPa"; };
      line("Parameters", ha, hb);
      line("MFP", fixed2(a.mfp_kpa), fixed2(b.mfp_kpa));
      line("Load %", fixed2(a.load_pct), fixed2(b.load_pct));
      line("Mean Heel Pressure", kpa(a.heel.mean_kpa), kpa(b.heel.mean_kpa));
      line("Max Heel Pressure", kpa(a.heel.max_kpa), kpa(b.heel.max_kpa));
      line("Load % on Heel", fixed2(a.heel.load_pct), fixed2(b.heel.load_pct));
      line("Mean Metatarsal Pressure", kpa(a.metatarsal.mean_kpa), kpa(b.metatarsal.mean_kpa));
      line("Max Metatarsal Pressure", kpa(a.metatarsal.max_kpa), kpa(b.metatarsal.max_kpa));
      line("Load % on Metatarsal", fixed2(a.metatarsal.load_pct), fixed2(b.metatarsal.load_pct));
      return os.str();
    }
  }
  return {};
}

}  // namespace pmat
