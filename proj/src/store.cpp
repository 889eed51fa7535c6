#include "pmat/store.hpp"

#include <cstring>
#include <iterator>

#include "pmat/error.hpp"

namespace pmat {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'A', 'T'};
constexpr char kAnnotationMagic[4] = {'P', 'A', 'N', 'N'};
constexpr char kAnnotationEnd[4] = {'P', 'E', 'N', 'D'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

nlohmann::json header_json(const SessionHeader& h) {
  return {{"layout", h.layout},
          {"calibration", h.calibration},
          {"metadata", h.metadata},
          {"start_wall_time", h.start_wall_time ? nlohmann::json(*h.start_wall_time) : nlohmann::json(nullptr)}};
}

SessionHeader header_from(const nlohmann::json& j) {
  SessionHeader h;
  h.layout = j.at("layout").get<SensorLayout>();
  h.calibration = j.at("calibration").get<CalibrationCurve>();
  h.metadata = j.value("metadata", nlohmann::json::object());
  if (j.contains("start_wall_time") && !j.at("start_wall_time").is_null()) {
    h.start_wall_time = j.at("start_wall_time").get<std::string>();
  }
  return h;
}

struct AnnotationBlock {
  std::size_t begin;
  std::size_t end;
  SessionAnnotations annotations;
};

std::optional<AnnotationBlock> annotation_block_at(std::span<const std::uint8_t> body, std::size_t i) {
  if (i + 8 > body.size() || std::memcmp(body.data() + i, kAnnotationMagic, 4) != 0) return std::nullopt;
  const std::uint64_t n = get_u32(body.data() + i + 4);
  const std::uint64_t end = i + 8 + n + 8;
  if (end > body.size()) return std::nullopt;
  const std::uint8_t* tail = body.data() + i + 8 + n;
  if (get_u32(tail) != n || std::memcmp(tail + 4, kAnnotationEnd, 4) != 0) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(body.data() + i + 8, body.data() + i + 8 + n);
    return AnnotationBlock{i, static_cast<std::size_t>(end), j.get<SessionAnnotations>()};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

void to_json(nlohmann::json& j, const SessionAnnotations& a) {
  auto caps = nlohmann::json::array();
  for (const auto& c : a.captures) {
    caps.push_back({{"first_seq", c.first_seq}, {"frame_count", c.frame_count}, {"label", c.label}});
  }
  j = {{"regions", a.regions}, {"captures", caps}};
}

void from_json(const nlohmann::json& j, SessionAnnotations& a) {
  SessionAnnotations out;
  if (j.contains("regions")) out.regions = j.at("regions").get<RegionSet>();
  if (j.contains("captures")) {
    for (const auto& c : j.at("captures")) {
      out.captures.push_back({c.at("first_seq").get<std::uint32_t>(), c.at("frame_count").get<std::uint32_t>(),
                              c.value("label", std::string())});
    }
  }
  a = std::move(out);
}

SessionWriter SessionWriter::create(const std::filesystem::path& path, const SessionHeader& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  std::string json;
  try {
    json = header_json(header).dump();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("session header: ") + e.what());
  }
  std::vector<std::uint8_t> prefix(kMagic, kMagic + 4);
  put_u16(prefix, kSessionVersion);
  put_u32(prefix, static_cast<std::uint32_t>(json.size()));
  SessionWriter w(std::move(out));
  w.write_raw(prefix.data(), prefix.size());
  w.write_raw(json.data(), json.size());
  w.out_.flush();
  w.summary_ = {};
  return w;
}

SessionWriter SessionWriter::append(const std::filesystem::path& path) {
  {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
      throw UnsupportedFormat(path.string() + ": not a session file");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot open " + path.string() + " for append");
  return SessionWriter(std::move(out));
}

SessionWriter::~SessionWriter() {
  if (out_.is_open()) out_.close();
}

void SessionWriter::write_raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw DataError("session write failed");
}

void SessionWriter::write_frame(const RawFrame& frame) {
  const WireFrame wire = encode_frame(frame);
  write_encoded(wire);
}

void SessionWriter::write_encoded(std::span<const std::uint8_t> bytes) {
  write_raw(bytes.data(), bytes.size());
  out_.flush();
  summary_.frames += bytes.size() / kWireFrameBytes;
  summary_.body_bytes += bytes.size();
}

void SessionWriter::write_annotations(const SessionAnnotations& annotations) {
  const std::string json = nlohmann::json(annotations).dump();
  std::vector<std::uint8_t> block(kAnnotationMagic, kAnnotationMagic + 4);
  put_u32(block, static_cast<std::uint32_t>(json.size()));
  block.insert(block.end(), json.begin(), json.end());
  put_u32(block, static_cast<std::uint32_t>(json.size()));
  block.insert(block.end(), kAnnotationEnd, kAnnotationEnd + 4);
  write_raw(block.data(), block.size());
  out_.flush();
}

void SessionWriter::close() {
  if (out_.is_open()) {
    out_.flush();
    out_.close();
  }
}

SessionSummary write_session(const std::filesystem::path& path, const SessionHeader& header,
                             std::span<const RawFrame> frames, const std::optional<SessionAnnotations>& annotations) {
  auto w = SessionWriter::create(path, header);
  for (const auto& f : frames) w.write_frame(f);
  if (annotations) w.write_annotations(*annotations);
  w.close();
  return w.summary();
}

Session parse_session(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw UnsupportedFormat("not a session file (bad magic)");
  }
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  if (version != kSessionVersion) {
    throw UnsupportedFormat("unsupported session format version " + std::to_string(version));
  }
  const std::uint64_t header_len = get_u32(bytes.data() + 6);
  if (10 + header_len > bytes.size()) throw DataError("session header is truncated");

  Session s;
  try {
    s.header = header_from(nlohmann::json::parse(bytes.data() + 10, bytes.data() + 10 + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("session header: ") + e.what());
  }

  const auto body = bytes.subspan(10 + header_len);
  std::vector<AnnotationBlock> blocks;
  for (std::size_t i = 0; i + 8 <= body.size(); ++i) {
    if (body[i] != 'P') continue;
    if (auto block = annotation_block_at(body, i)) {
      i = block->end - 1;
      blocks.push_back(std::move(*block));
    }
  }

  StreamDecoder decoder;
  auto sink = [&](const RawFrame& f) { s.frames.push_back(f); };
  std::size_t at = 0;
  for (const auto& b : blocks) {
    decoder.feed(body.subspan(at, b.begin - at), sink);
    at = b.end;
  }
  decoder.feed(body.subspan(at), sink);
  decoder.finish();
  s.diagnostics = decoder.diagnostics();
  if (!blocks.empty()) s.annotations = blocks.back().annotations;
  return s;
}

Session read_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_session(bytes);
}

}  // namespace pmat
