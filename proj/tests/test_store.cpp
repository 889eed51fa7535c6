#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "pmat/error.hpp"
#include "pmat/store.hpp"

using namespace pmat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pmat_store_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

SessionHeader make_header() {
  SessionHeader h;
  std::vector<CalibrationSample> s;
  for (int i = 0; i < 10; ++i) {
    s.push_back({10.0 * i, 100.0 + 30.0 * i, Branch::loading});
    s.push_back({10.0 * i, 100.0 + 30.0 * i, Branch::unloading});
  }
  h.calibration = build_curve(s);
  h.metadata = {{"scene", "unit-test"}};
  return h;
}

std::vector<RawFrame> make_frames(int n) {
  SimulatorConfig cfg;
  PressureBlob b;
  b.center_cm = {8.0, 8.0};
  b.amplitude_kpa = 200.0;
  cfg.scene.blobs.push_back(b);
  cfg.scene.noise_sigma_kpa = 2.0;
  Simulator sim(cfg);
  std::vector<RawFrame> out;
  for (int i = 0; i < n; ++i) out.push_back(sim.next_frame());
  return out;
}

SessionAnnotations make_annotations() {
  SessionAnnotations a;
  a.regions.regions.push_back({"foot-L", {{1, 1}, {6, 1}, {6, 14}, {1, 14}}});
  a.captures.push_back({5, 50, "capture-1"});
  return a;
}

}  // namespace

TEST_CASE("round trip") {
  TempDir dir;
  const auto path = dir.path / "s.pmat";
  const auto header = make_header();
  const auto frames = make_frames(20);
  const auto summary = write_session(path, header, frames, make_annotations());
  CHECK(summary.frames == 20);
  CHECK(summary.body_bytes == 20 * kWireFrameBytes);

  const Session s = read_session(path);
  CHECK(s.frames == frames);
  CHECK(s.header.calibration.id() == header.calibration.id());
  CHECK(s.header.metadata == header.metadata);
  CHECK_FALSE(s.header.start_wall_time.has_value());
  REQUIRE(s.annotations.has_value());
  CHECK(s.annotations->captures == make_annotations().captures);
  CHECK(s.annotations->regions.regions.at(0).polygon == make_annotations().regions.regions[0].polygon);
  CHECK(s.diagnostics == DecodeDiagnostics{.frames_ok = 20});

  // Rewriting the same content gives the same bytes.
  const auto again = dir.path / "t.pmat";
  write_session(again, header, frames, make_annotations());
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("10 s at 155 Hz") {
  TempDir dir;
  const auto path = dir.path / "ten.pmat";
  const auto frames = make_frames(1550);
  const auto summary = write_session(path, make_header(), frames, std::nullopt);
  CHECK(summary.frames == 1550);
  CHECK(summary.body_bytes == 1550ull * 2066ull);
  const auto bytes = slurp(path);
  // magic + version + length + header JSON + body.
  const std::uint32_t hlen = bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (static_cast<std::uint32_t>(bytes[9]) << 24);
  CHECK(bytes.size() == 10 + hlen + 1550ull * 2066ull);
  CHECK(read_session(path).frames.size() == 1550);
}

TEST_CASE("truncation loses only the final partial frame") {
  TempDir dir;
  const auto path = dir.path / "cut.pmat";
  const auto frames = make_frames(12);
  write_session(path, make_header(), frames, std::nullopt);
  auto bytes = slurp(path);
  for (std::size_t cut : {1ul, 700ul, 2065ul}) {
    std::vector<std::uint8_t> b(bytes.begin(), bytes.end() - static_cast<long>(cut));
    const Session s = parse_session(b);
    CHECK(s.frames.size() == 11);
    CHECK(std::equal(s.frames.begin(), s.frames.end(), frames.begin()));
    CHECK(s.diagnostics.truncated_frames == 1);
    CHECK(s.diagnostics.crc_failures == 0);
  }
}

TEST_CASE("reader diagnostics equal decoder diagnostics") {
  TempDir dir;
  const auto path = dir.path / "d.pmat";
  write_session(path, make_header(), make_frames(8), std::nullopt);
  auto bytes = slurp(path);
  const std::size_t body = bytes.size() - 8 * kWireFrameBytes;
  bytes[body + 3 * kWireFrameBytes + 500] ^= 0x10;
  const Session s = parse_session(bytes);
  const auto direct = decode_all(std::span<const std::uint8_t>(bytes.data() + body, bytes.size() - body));
  CHECK(s.diagnostics == direct.diagnostics);
  CHECK(s.frames.size() == 7);
  CHECK(s.diagnostics.seq_gaps == 1);
}

TEST_CASE("append never rewrites existing bytes") {
  TempDir dir;
  const auto path = dir.path / "a.pmat";
  const auto frames = make_frames(10);
  {
    auto w = SessionWriter::create(path, make_header());
    for (int i = 0; i < 5; ++i) w.write_frame(frames[i]);
    w.write_annotations(make_annotations());
  }
  const auto before = slurp(path);
  {
    auto w = SessionWriter::append(path);
    for (int i = 5; i < 10; ++i) w.write_frame(frames[i]);
    SessionAnnotations later = make_annotations();
    later.captures.push_back({6, 3, "second"});
    w.write_annotations(later);
  }
  const auto after = slurp(path);
  REQUIRE(after.size() > before.size());
  CHECK(std::equal(before.begin(), before.end(), after.begin()));

  const Session s = read_session(path);
  CHECK(s.frames == frames);
  REQUIRE(s.annotations.has_value());
  CHECK(s.annotations->captures.size() == 2);
  CHECK(s.diagnostics.bytes_skipped == 0);
}

TEST_CASE("bad files") {
  TempDir dir;
  std::vector<std::uint8_t> junk = {'P', 'M', 'A', 'X', 1, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(parse_session(junk), UnsupportedFormat);
  std::vector<std::uint8_t> future = {'P', 'M', 'A', 'T', 9, 0, 2, 0, 0, 0, '{', '}'};
  CHECK_THROWS_AS(parse_session(future), UnsupportedFormat);
  CHECK_THROWS_AS(read_session(dir.path / "missing.pmat"), DataError);
  CHECK_THROWS_AS(SessionWriter::create(dir.path / "no" / "such" / "dir.pmat", make_header()), DataError);
}
