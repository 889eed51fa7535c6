#include "pmat/stream_messages.hpp"

#include <cmath>

#include "pmat/error.hpp"
#include "pmat/json_util.hpp"

namespace pmat {

void to_json(nlohmann::json& j, const DecodeDiagnostics& d) {
  j = {{"frames_ok", d.frames_ok},         {"crc_failures", d.crc_failures}, {"resyncs", d.resyncs},
       {"bytes_skipped", d.bytes_skipped}, {"seq_gaps", d.seq_gaps},         {"truncated_frames", d.truncated_frames}};
}

void from_json(const nlohmann::json& j, DecodeDiagnostics& d) {
  d.frames_ok = j.at("frames_ok").get<std::uint64_t>();
  d.crc_failures = j.at("crc_failures").get<std::uint64_t>();
  d.resyncs = j.at("resyncs").get<std::uint64_t>();
  d.bytes_skipped = j.at("bytes_skipped").get<std::uint64_t>();
  d.seq_gaps = j.at("seq_gaps").get<std::uint64_t>();
  d.truncated_frames = j.value("truncated_frames", std::uint64_t{0});
}

}  // namespace pmat

namespace pmat::stream {

using nlohmann::json;

std::string to_string(Subscription s) { return s == Subscription::raw ? "raw" : "processed"; }

Subscription subscription_from_string(const std::string& s) {
  if (s == "raw") return Subscription::raw;
  if (s == "processed") return Subscription::processed;
  throw DataError("unknown subscription '" + s + "' (expected raw or processed)");
}

GridPayload grid_payload(const Eigen::ArrayXXd& values, double pitch_cm, const Eigen::Vector2d& origin_cm,
                         std::string units) {
  GridPayload g;
  g.rows = values.rows();
  g.cols = values.cols();
  g.pitch_cm = pitch_cm;
  g.origin_cm = origin_cm;
  g.units = std::move(units);
  g.values.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index r = 0; r < g.rows; ++r) {
    for (Eigen::Index c = 0; c < g.cols; ++c) g.values.push_back(std::round(values(r, c) * 10.0) / 10.0);
  }
  return g;
}

namespace {

const char* level_name(StatusMsg::Level l) {
  switch (l) {
    case StatusMsg::Level::info: return "info";
    case StatusMsg::Level::warning: return "warning";
    case StatusMsg::Level::error: return "error";
  }
  return "info";
}

StatusMsg::Level level_from(const std::string& s) {
  if (s == "info") return StatusMsg::Level::info;
  if (s == "warning") return StatusMsg::Level::warning;
  if (s == "error") return StatusMsg::Level::error;
  throw DataError("status: unknown level '" + s + "'");
}

json grid_json(const GridPayload& g) {
  return {{"rows", g.rows},   {"cols", g.cols},   {"pitch_cm", g.pitch_cm}, {"origin_cm", g.origin_cm},
          {"units", g.units}, {"values", g.values}};
}

GridPayload grid_from(const json& j) {
  GridPayload g;
  g.rows = j.at("rows").get<Eigen::Index>();
  g.cols = j.at("cols").get<Eigen::Index>();
  g.pitch_cm = j.at("pitch_cm").get<double>();
  g.origin_cm = j.at("origin_cm").get<Eigen::Vector2d>();
  g.units = j.at("units").get<std::string>();
  g.values = j.at("values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(g.values.size()) != g.rows * g.cols) {
    throw DataError("grid: values has " + std::to_string(g.values.size()) + " entries, expected rows*cols");
  }
  return g;
}

json envelope(const char* type) { return {{"type", type}, {"protocol_version", kProtocolVersion}}; }

struct ServerToJson {
  json operator()(const Hello& h) const {
    json j = envelope("hello");
    j["layout"] = h.layout;
    j["channels"] = h.channels;
    j["grid"] = {{"rows", h.grid_rows}, {"cols", h.grid_cols}};
    j["calibration_id"] = h.calibration_id;
    j["source_rate_hz"] = h.source_rate_hz;
    j["display_rate_hz"] = h.display_rate_hz;
    j["subscription"] = to_string(h.subscription);
    j["regions"] = h.regions ? json(*h.regions) : json(nullptr);
    return j;
  }
  json operator()(const FieldMsg& f) const {
    json j = envelope("field");
    j["seq"] = f.seq;
    j["timestamp_us"] = f.timestamp_us;
    j["mode"] = to_string(f.mode);
    j["grid"] = grid_json(f.grid);
    j["saturated_channels"] = f.saturated_channels;
    return j;
  }
  json operator()(const ReportMsg& r) const {
    json j = envelope("report");
    j["capture_id"] = r.capture_id;
    j["first_seq"] = r.first_seq;
    j["frame_count"] = r.frame_count;
    j["report"] = r.report;
    j["field"] = grid_json(r.field);
    j["notes"] = r.notes;
    return j;
  }
  json operator()(const StatusMsg& s) const {
    json j = envelope("status");
    j["level"] = level_name(s.level);
    j["event"] = s.event;
    j["message"] = s.message;
    j["reasons"] = s.reasons;
    j["fps"] = s.fps;
    j["dropped_fields"] = s.dropped_fields;
    j["diagnostics"] = s.diagnostics ? json(*s.diagnostics) : json(nullptr);
    return j;
  }
};

struct ClientToJson {
  json operator()(const SetRoi& m) const {
    json j = envelope("set_roi");
    j["regions"] = m.regions;
    return j;
  }
  json operator()(const Capture& m) const {
    json j = envelope("capture");
    j["n_frames"] = m.n_frames;
    return j;
  }
  json operator()(const SetDisplayRate& m) const {
    json j = envelope("set_display_rate");
    j["hz"] = m.hz;
    return j;
  }
  json operator()(const Subscribe& m) const {
    json j = envelope("subscribe");
    j["mode"] = to_string(m.mode);
    return j;
  }
  json operator()(const UnknownMessage& m) const { return envelope(m.type.c_str()); }
};

json parse_envelope(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("message is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("message must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw DataError("message: missing string field 'type'");
  if (!j.contains("protocol_version") || !j["protocol_version"].is_number_integer()) {
    throw DataError("message: missing integer field 'protocol_version'");
  }
  if (j["protocol_version"].get<int>() != kProtocolVersion) {
    throw DataError("message: unsupported protocol_version " + j["protocol_version"].dump());
  }
  return j;
}

template <typename F>
auto guarded(const std::string& type, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(type + ": " + e.what());
  }
}

}  // namespace

json to_json_value(const ServerMessage& m) { return std::visit(ServerToJson{}, m); }
json to_json_value(const ClientMessage& m) { return std::visit(ClientToJson{}, m); }
std::string serialize(const ServerMessage& m) { return to_json_value(m).dump(); }
std::string serialize(const ClientMessage& m) { return to_json_value(m).dump(); }

ServerMessage parse_server_message(const std::string& text) {
  const json j = parse_envelope(text);
  const std::string type = j["type"];
  return guarded(type, [&]() -> ServerMessage {
    if (type == "hello") {
      Hello h;
      h.layout = j.at("layout").get<SensorLayout>();
      h.channels = j.at("channels").get<int>();
      h.grid_rows = j.at("grid").at("rows").get<Eigen::Index>();
      h.grid_cols = j.at("grid").at("cols").get<Eigen::Index>();
      h.calibration_id = j.at("calibration_id").get<std::string>();
      h.source_rate_hz = j.at("source_rate_hz").get<double>();
      h.display_rate_hz = j.at("display_rate_hz").get<double>();
      h.subscription = subscription_from_string(j.at("subscription").get<std::string>());
      if (!j.at("regions").is_null()) h.regions = j.at("regions").get<RegionSet>();
      return h;
    }
    if (type == "field") {
      FieldMsg f;
      f.seq = j.at("seq").get<std::uint32_t>();
      f.timestamp_us = j.at("timestamp_us").get<std::uint64_t>();
      f.mode = subscription_from_string(j.at("mode").get<std::string>());
      f.grid = grid_from(j.at("grid"));
      f.saturated_channels = j.at("saturated_channels").get<int>();
      return f;
    }
    if (type == "report") {
      ReportMsg r;
      r.capture_id = j.at("capture_id").get<std::uint64_t>();
      r.first_seq = j.at("first_seq").get<std::uint32_t>();
      r.frame_count = j.at("frame_count").get<int>();
      r.report = j.at("report");
      r.field = grid_from(j.at("field"));
      r.notes = j.at("notes").get<std::vector<std::string>>();
      return r;
    }
    if (type == "status") {
      StatusMsg s;
      s.level = level_from(j.at("level").get<std::string>());
      s.event = j.at("event").get<std::string>();
      s.message = j.at("message").get<std::string>();
      s.reasons = j.at("reasons").get<std::vector<std::string>>();
      s.fps = j.at("fps").get<double>();
      s.dropped_fields = j.at("dropped_fields").get<std::uint64_t>();
      if (!j.at("diagnostics").is_null()) s.diagnostics = j.at("diagnostics").get<DecodeDiagnostics>();
      return s;
    }
    throw DataError("unknown server message type '" + type + "'");
  });
}

ClientMessage parse_client_message(const std::string& text) {
  const json j = parse_envelope(text);
  const std::string type = j["type"];
  return guarded(type, [&]() -> ClientMessage {
    if (type == "set_roi") return SetRoi{j.at("regions").get<RegionSet>()};
    if (type == "capture") {
      Capture c;
      if (j.contains("n_frames")) c.n_frames = j["n_frames"].get<int>();
      if (c.n_frames < 1) throw DataError("capture: n_frames must be >= 1");
      return c;
    }
    if (type == "set_display_rate") {
      SetDisplayRate r{j.at("hz").get<double>()};
      if (!(r.hz > 0.0)) throw DataError("set_display_rate: hz must be > 0");
      return r;
    }
    if (type == "subscribe") return Subscribe{subscription_from_string(j.at("mode").get<std::string>())};
    return UnknownMessage{type};
  });
}

}  // namespace pmat::stream
