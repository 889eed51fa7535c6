#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pmat/geometry.hpp"
#include "pmat/metrics.hpp"
#include "pmat/protocol.hpp"

namespace pmat::stream {

inline constexpr int kProtocolVersion = 1;
inline constexpr double kMaxDisplayRateHz = 30.0;
inline constexpr int kDefaultCaptureFrames = 50;

enum class Subscription { processed, raw };
std::string to_string(Subscription s);
Subscription subscription_from_string(const std::string& s);

/// A grid of values in row-major order. Cell (r, c) is centred at
/// origin_cm + pitch_cm * (c, r).
struct GridPayload {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double pitch_cm = 0.0;
  Eigen::Vector2d origin_cm = Eigen::Vector2d::Zero();
  std::string units;
  std::vector<double> values;

  friend bool operator==(const GridPayload&, const GridPayload&) = default;
};

/// Rounds to one decimal; keeps live messages compact.
GridPayload grid_payload(const Eigen::ArrayXXd& values, double pitch_cm, const Eigen::Vector2d& origin_cm,
                         std::string units);

// --- server to client ---------------------------------------------------------

struct Hello {
  SensorLayout layout;
  int channels = kChannels;
  Eigen::Index grid_rows = 0;
  Eigen::Index grid_cols = 0;
  std::string calibration_id;
  double source_rate_hz = 0.0;
  double display_rate_hz = 0.0;
  Subscription subscription = Subscription::processed;
  std::optional<RegionSet> regions;
};

struct FieldMsg {
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;
  Subscription mode = Subscription::processed;
  GridPayload grid;
  int saturated_channels = 0;
};

struct ReportMsg {
  std::uint64_t capture_id = 0;
  std::uint32_t first_seq = 0;
  int frame_count = 0;
  /// MetricsReport JSON; null when no complete ROI set was available.
  nlohmann::json report;
  /// The processed capture, block-averaged for transport.
  GridPayload field;
  std::vector<std::string> notes;
};

struct StatusMsg {
  enum class Level { info, warning, error };
  Level level = Level::info;
  /// Machine-readable tag: tick, end, roi_accepted, roi_rejected,
  /// capture_started, capture_failed, unknown_type, bad_message, rate_set,
  /// subscribed.
  std::string event;
  std::string message;
  std::vector<std::string> reasons;
  double fps = 0.0;
  std::uint64_t dropped_fields = 0;
  std::optional<DecodeDiagnostics> diagnostics;
};

using ServerMessage = std::variant<Hello, FieldMsg, ReportMsg, StatusMsg>;

// --- client to server -----------------------------------------------------------

struct SetRoi {
  RegionSet regions;
};
struct Capture {
  int n_frames = kDefaultCaptureFrames;
};
struct SetDisplayRate {
  double hz = kMaxDisplayRateHz;
};
struct Subscribe {
  Subscription mode = Subscription::processed;
};
/// A well-formed message of a type this server does not know.
struct UnknownMessage {
  std::string type;
};

using ClientMessage = std::variant<SetRoi, Capture, SetDisplayRate, Subscribe, UnknownMessage>;

/// Every message carries "type" and "protocol_version". Serialization is
/// canonical (sorted keys, shortest round-trip numbers), so
/// serialize(parse(serialize(m))) == serialize(m).
std::string serialize(const ServerMessage& m);
std::string serialize(const ClientMessage& m);

/// Throw DataError naming the offending field.
ServerMessage parse_server_message(const std::string& text);
ClientMessage parse_client_message(const std::string& text);

nlohmann::json to_json_value(const ServerMessage& m);
nlohmann::json to_json_value(const ClientMessage& m);

}  // namespace pmat::stream

namespace pmat {
void to_json(nlohmann::json& j, const DecodeDiagnostics& d);
void from_json(const nlohmann::json& j, DecodeDiagnostics& d);
}  // namespace pmat
