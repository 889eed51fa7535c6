#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmat/calibration.hpp"
#include "pmat/geometry.hpp"
#include "pmat/metrics.hpp"
#include "pmat/protocol.hpp"
#include "pmat/report_io.hpp"

namespace pmat {

// Session file, little-endian:
//   "PMAT" | u16 version | u32 header length | header JSON
//   wire frames, back to back
//   optional annotation block: "PANN" | u32 n | n bytes JSON | u32 n | "PEND"
// Frames may follow an annotation block when a session is reopened for
// append; the last complete block wins.
inline constexpr std::uint16_t kSessionVersion = 1;

struct SessionHeader {
  SensorLayout layout;
  CalibrationCurve calibration;
  /// Scene, device and tool metadata; free-form.
  nlohmann::json metadata = nlohmann::json::object();
  /// ISO-8601 wall time, or unset for deterministic sessions.
  std::optional<std::string> start_wall_time;
};

struct CaptureMarker {
  std::uint32_t first_seq = 0;
  std::uint32_t frame_count = 0;
  std::string label;

  friend bool operator==(const CaptureMarker&, const CaptureMarker&) = default;
};

struct SessionAnnotations {
  RegionSet regions;
  std::vector<CaptureMarker> captures;
};

struct SessionSummary {
  std::uint64_t frames = 0;
  std::uint64_t body_bytes = 0;
};

/// Single writer. Every frame is flushed as it is written, so a crash loses
/// at most the frame in flight and never the header.
class SessionWriter {
 public:
  static SessionWriter create(const std::filesystem::path& path, const SessionHeader& header);
  /// Reopens an existing session; new bytes go after everything already there.
  static SessionWriter append(const std::filesystem::path& path);

  SessionWriter(SessionWriter&&) = default;
  SessionWriter& operator=(SessionWriter&&) = default;
  ~SessionWriter();

  void write_frame(const RawFrame& frame);
  void write_encoded(std::span<const std::uint8_t> wire_bytes);
  void write_annotations(const SessionAnnotations& annotations);
  void close();

  const SessionSummary& summary() const { return summary_; }

 private:
  explicit SessionWriter(std::ofstream out) : out_(std::move(out)) {}
  void write_raw(const void* data, std::size_t n);

  std::ofstream out_;
  SessionSummary summary_;
};

SessionSummary write_session(const std::filesystem::path& path, const SessionHeader& header,
                             std::span<const RawFrame> frames, const std::optional<SessionAnnotations>& annotations);

struct Session {
  SessionHeader header;
  std::vector<RawFrame> frames;
  std::optional<SessionAnnotations> annotations;
  DecodeDiagnostics diagnostics;
};

/// Tolerant reader: frames go through the protocol decoder, so corrupt or
/// truncated frames show up in diagnostics instead of failing the read.
/// Throws UnsupportedFormat on a bad magic or version.
Session read_session(const std::filesystem::path& path);
Session parse_session(std::span<const std::uint8_t> bytes);

void to_json(nlohmann::json& j, const SessionAnnotations& a);
void from_json(const nlohmann::json& j, SessionAnnotations& a);

}  // namespace pmat
