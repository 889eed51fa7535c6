#include "pmat/protocol.hpp"

#include <algorithm>
#include <string>

#include "pmat/error.hpp"

namespace pmat {

namespace {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (int i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

template <typename T>
void put_le(std::uint8_t* out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<std::uint8_t>(value >> (8 * i));
}

template <typename T>
T get_le(const std::uint8_t* in) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(in[i]) << (8 * i);
  return value;
}

}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes, std::uint16_t crc) {
  for (std::uint8_t b : bytes) {
    crc = static_cast<std::uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ b) & 0xFF]);
  }
  return crc;
}

void encode_frame_into(const RawFrame& frame, std::span<std::uint8_t, kWireFrameBytes> out) {
  for (int ch = 0; ch < kChannels; ++ch) {
    if (frame.counts[ch] > 0x0FFF) {
      throw DataError("encode_frame: count " + std::to_string(frame.counts[ch]) + " at channel " +
                      std::to_string(ch) + " exceeds 12 bits");
    }
  }
  std::uint8_t* p = out.data();
  p[0] = kSync0;
  p[1] = kSync1;
  p[2] = kWireVersion;
  p[3] = frame.flags;
  put_le<std::uint32_t>(p + 4, frame.seq);
  put_le<std::uint64_t>(p + 8, frame.timestamp_us);
  for (int ch = 0; ch < kChannels; ++ch) put_le<std::uint16_t>(p + kHeaderBytes + 2 * ch, frame.counts[ch]);
  const auto crc = crc16_ccitt_false(std::span<const std::uint8_t>(p + 2, kWireFrameBytes - 4));
  put_le<std::uint16_t>(p + kWireFrameBytes - 2, crc);
}

WireFrame encode_frame(const RawFrame& frame) {
  WireFrame out;
  encode_frame_into(frame, out);
  return out;
}

std::optional<RawFrame> decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireFrameBytes) return std::nullopt;
  const std::uint8_t* p = bytes.data();
  if (p[0] != kSync0 || p[1] != kSync1 || p[2] != kWireVersion) return std::nullopt;
  const auto crc = crc16_ccitt_false(std::span<const std::uint8_t>(p + 2, kWireFrameBytes - 4));
  if (crc != get_le<std::uint16_t>(p + kWireFrameBytes - 2)) return std::nullopt;
  RawFrame frame;
  frame.flags = p[3];
  frame.seq = get_le<std::uint32_t>(p + 4);
  frame.timestamp_us = get_le<std::uint64_t>(p + 8);
  for (int ch = 0; ch < kChannels; ++ch) {
    frame.counts[ch] = get_le<std::uint16_t>(p + kHeaderBytes + 2 * ch);
    // Upper nibble is reserved; a set bit means the payload is corrupt even if
    // the CRC happens to match.
    if (frame.counts[ch] > 0x0FFF) return std::nullopt;
  }
  return frame;
}

void StreamDecoder::skip(std::size_t n) {
  if (n == 0) return;
  if (locked_) {
    ++diag_.resyncs;
    locked_ = false;
  }
  diag_.bytes_skipped += n;
  pos_ += n;
}

std::optional<RawFrame> StreamDecoder::step() {
  for (;;) {
    const std::size_t avail = buffer_.size() - pos_;
    if (avail < 2) return std::nullopt;
    const std::uint8_t* p = buffer_.data() + pos_;

    if (p[0] != kSync0 || p[1] != kSync1) {
      // Hunt for the next sync pair; keep a trailing 0xAA that may pair up
      // with the first byte of the next chunk.
      std::size_t i = 1;
      for (; i + 1 < avail; ++i) {
        if (p[i] == kSync0 && p[i + 1] == kSync1) break;
      }
      if (i + 1 >= avail && p[avail - 1] != kSync0) i = avail;
      skip(std::min(i, avail));
      continue;
    }

    if (avail < kWireFrameBytes) return std::nullopt;
    if (auto frame = decode_frame(std::span<const std::uint8_t>(p, kWireFrameBytes))) {
      pos_ += kWireFrameBytes;
      locked_ = true;
      ++diag_.frames_ok;
      if (last_seq_ && frame->seq > *last_seq_ + 1) diag_.seq_gaps += frame->seq - *last_seq_ - 1;
      last_seq_ = frame->seq;
      return frame;
    }
    if (locked_) {
      // The whole failed frame is stepped over; a sync pair inside it may still
      // start a real frame, so only one byte is consumed before hunting.
      ++diag_.crc_failures;
    }
    skip(1);
  }
}

void StreamDecoder::compact() {
  if (pos_ > 0 && (pos_ > 65536 || pos_ == buffer_.size())) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
}

void StreamDecoder::finish() {
  const std::size_t avail = buffer_.size() - pos_;
  if (avail == 0) return;
  const std::uint8_t* p = buffer_.data() + pos_;
  // A lone trailing 0xAA is the first byte of a frame that never arrived.
  if (p[0] == kSync0 && (avail == 1 || p[1] == kSync1)) {
    ++diag_.truncated_frames;
    pos_ = buffer_.size();
  } else {
    skip(avail);
  }
  compact();
}

DecodeResult decode_all(std::span<const std::uint8_t> bytes) {
  StreamDecoder decoder;
  DecodeResult result;
  result.frames = decoder.feed(bytes);
  decoder.finish();
  result.diagnostics = decoder.diagnostics();
  return result;
}

}  // namespace pmat
