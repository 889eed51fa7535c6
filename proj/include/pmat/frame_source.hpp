#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "pmat/protocol.hpp"
#include "pmat/sensor_sim.hpp"
#include "pmat/store.hpp"

namespace pmat {

/// Pull-based supplier of frames for the live service. next() never blocks on
/// pacing; the caller owns the clock.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// nullopt once the source is exhausted.
  virtual std::optional<RawFrame> next() = 0;
  virtual double rate_hz() const = 0;
  virtual const SensorLayout& layout() const = 0;
  virtual DecodeDiagnostics diagnostics() const { return {}; }
};

class SimulatorSource final : public FrameSource {
 public:
  /// Unbounded when `duration_s` is unset.
  explicit SimulatorSource(SimulatorConfig config, std::optional<double> duration_s = std::nullopt);
  std::optional<RawFrame> next() override;
  double rate_hz() const override { return rate_; }
  const SensorLayout& layout() const override { return layout_; }

 private:
  Simulator sim_;
  SensorLayout layout_;
  double rate_;
  std::optional<std::uint64_t> limit_;
  std::uint64_t produced_ = 0;
};

/// Replays the frames of a recorded session in order, optionally looping.
class SessionSource final : public FrameSource {
 public:
  SessionSource(Session session, bool loop = false, double rate_hz = 155.0);
  std::optional<RawFrame> next() override;
  double rate_hz() const override { return rate_; }
  const SensorLayout& layout() const override { return session_.header.layout; }
  DecodeDiagnostics diagnostics() const override { return session_.diagnostics; }
  const Session& session() const { return session_; }

 private:
  Session session_;
  bool loop_;
  double rate_;
  std::size_t index_ = 0;
};

/// Reads wire frames from a TCP byte stream (a device or `simulate --listen`).
/// next() blocks until a frame arrives and returns nullopt when the peer
/// closes the connection.
class TcpDeviceSource final : public FrameSource {
 public:
  TcpDeviceSource(const std::string& host, std::uint16_t port, SensorLayout layout = {}, double rate_hz = 155.0);
  ~TcpDeviceSource() override;
  std::optional<RawFrame> next() override;
  double rate_hz() const override { return rate_; }
  const SensorLayout& layout() const override { return layout_; }
  DecodeDiagnostics diagnostics() const override { return decoder_.diagnostics(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SensorLayout layout_;
  double rate_;
  StreamDecoder decoder_;
  std::deque<RawFrame> pending_;
  bool closed_ = false;
};

/// Serves one TCP client with the encoded frames of `source`, paced at the
/// source rate. `on_listening` receives the bound port before accept. Returns
/// the number of frames sent; stops when the source is exhausted, the peer
/// disconnects or `stop` becomes true.
std::uint64_t run_device_link(FrameSource& source, const std::string& bind_address, std::uint16_t port,
                              const std::function<void(std::uint16_t)>& on_listening,
                              const std::atomic<bool>& stop);

/// "host:port" or ":port" / "port" (host defaults to 127.0.0.1).
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text);

}  // namespace pmat
