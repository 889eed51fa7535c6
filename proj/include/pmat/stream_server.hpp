#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pmat/calibration.hpp"
#include "pmat/frame_source.hpp"
#include "pmat/metrics.hpp"
#include "pmat/pipeline.hpp"
#include "pmat/stream_messages.hpp"

namespace pmat::stream {

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  /// 0 picks an ephemeral port; start() returns the bound one.
  std::uint16_t port = 0;
  double display_rate_hz = kMaxDisplayRateHz;
  /// Outbound messages buffered per client before `field` messages are dropped.
  std::size_t client_queue_limit = 32;
  /// Kernel send buffer per client socket; 0 keeps the OS default. A small
  /// buffer makes the drop-oldest policy act sooner for slow clients.
  int send_buffer_bytes = 0;
  double status_interval_s = 1.0;
  CaptureSpec capture;
  double contact_threshold_kpa = kDefaultContactThresholdKpa;
  /// Static files for plain HTTP requests; the WebSocket lives at /stream.
  std::optional<std::filesystem::path> ui_dir;
  /// Records every frame plus ROI and capture annotations to a session file.
  std::optional<std::filesystem::path> record_path;
  SessionHeader record_header;
  /// Each report's field is block-averaged by this factor for transport.
  int report_field_downsample = 5;
};

struct TickStats {
  std::uint64_t ticks = 0;
  double mean_period_s = 0.0;
  double stddev_period_s = 0.0;
};

/// Live service. One tick thread pulls frames from the source on absolute
/// deadlines, applies client commands in arrival order, and fans out
/// messages; socket I/O runs on a separate I/O thread and capture processing
/// on a worker, so neither can stall the tick.
class StreamServer {
 public:
  StreamServer(std::unique_ptr<FrameSource> source, CalibrationCurve curve, ServerOptions options = {},
               std::optional<RegionSet> regions = std::nullopt);
  ~StreamServer();
  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  /// Binds and starts all threads; returns the bound port. Throws DataError
  /// if the address cannot be bound.
  std::uint16_t start();
  void stop();
  /// True once the source is exhausted and `status: end` has gone out.
  bool source_finished() const;
  /// Blocks until the source is exhausted (or stop() is called).
  void wait_finished();

  std::size_t client_count() const;
  /// `field` messages dropped across all clients by the queue policy.
  std::uint64_t dropped_fields() const;
  TickStats tick_stats() const;
  /// Forget accumulated tick timings; measurements start over.
  void reset_tick_stats();

  /// Opaque; public only so the connection classes in the implementation can
  /// name it.
  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace pmat::stream
