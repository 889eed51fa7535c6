#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pmat/sensor_sim.hpp"

namespace pmat {

// Wire layout, all multi-byte fields little-endian:
//   0  sync      AA 55
//   2  version   01
//   3  flags
//   4  seq       u32
//   8  timestamp u64, microseconds
//  16  payload   1024 x u16 counts
//  2064 crc     u16, CRC-16/CCITT-FALSE over bytes 2..2063
inline constexpr std::uint8_t kSync0 = 0xAA;
inline constexpr std::uint8_t kSync1 = 0x55;
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kWireFrameBytes = kHeaderBytes + 2 * kChannels + 2;  // 2066

using WireFrame = std::array<std::uint8_t, kWireFrameBytes>;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes, std::uint16_t crc = 0xFFFF);

/// Throws DataError naming the channel if any count exceeds 12 bits.
WireFrame encode_frame(const RawFrame& frame);
void encode_frame_into(const RawFrame& frame, std::span<std::uint8_t, kWireFrameBytes> out);

/// Decodes one complete wire frame; nullopt if sync, version or CRC fail.
std::optional<RawFrame> decode_frame(std::span<const std::uint8_t> bytes);

/// Sustained link rate in bits per second for a given frame rate.
constexpr double stream_bit_rate(double frames_per_second) {
  return static_cast<double>(kWireFrameBytes) * frames_per_second * 8.0;
}

inline constexpr double kUsbFullSpeedBitRate = 12e6;

struct DecodeDiagnostics {
  std::uint64_t frames_ok = 0;
  std::uint64_t crc_failures = 0;
  std::uint64_t resyncs = 0;
  std::uint64_t bytes_skipped = 0;
  std::uint64_t seq_gaps = 0;
  std::uint64_t truncated_frames = 0;

  friend bool operator==(const DecodeDiagnostics&, const DecodeDiagnostics&) = default;
};

/// Incremental decoder for a byte stream of wire frames. Output depends only
/// on the concatenated bytes, never on how they were chunked.
///
/// A frame that starts exactly where the previous one ended (or at stream
/// start) and fails verification counts as a CRC failure. Anything else the
/// decoder has to step over while hunting for the next sync pair is counted in
/// bytes_skipped, and each departure from lock counts one resync.
class StreamDecoder {
 public:
  template <typename OnFrame>
  void feed(std::span<const std::uint8_t> bytes, OnFrame&& on_frame) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    while (auto frame = step()) on_frame(*frame);
    compact();
  }

  std::vector<RawFrame> feed(std::span<const std::uint8_t> bytes) {
    std::vector<RawFrame> out;
    feed(bytes, [&](const RawFrame& f) { out.push_back(f); });
    return out;
  }

  /// Flushes at end of stream: leftover bytes that begin with a sync pair (or
  /// are a single 0xAA) count as one truncated frame, anything else as
  /// skipped bytes.
  void finish();

  const DecodeDiagnostics& diagnostics() const { return diag_; }
  std::size_t buffered() const { return buffer_.size() - pos_; }

 private:
  std::optional<RawFrame> step();
  void skip(std::size_t n);
  void compact();

  std::vector<std::uint8_t> buffer_;
  std::size_t pos_ = 0;
  bool locked_ = true;
  std::optional<std::uint32_t> last_seq_;
  DecodeDiagnostics diag_;
};

/// Convenience: decode a complete byte buffer in one call.
struct DecodeResult {
  std::vector<RawFrame> frames;
  DecodeDiagnostics diagnostics;
};
DecodeResult decode_all(std::span<const std::uint8_t> bytes);

}  // namespace pmat
