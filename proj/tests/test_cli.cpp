#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "pmat/store.hpp"

namespace fs = std::filesystem;
using namespace pmat;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run pmat_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + PMAT_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scene(const std::string& name) { return "\"" + (fs::path(PMAT_SOURCE_DIR) / "scenes" / name).string() + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("pmat_cli_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return "\"" + (path / name).string() + "\""; }
};

}  // namespace

TEST_CASE("simulate writes 155 frames per second, deterministically") {
  TempDir tmp;
  auto r = pmat_cli("simulate --scene " + scene("standing.json") + " --seed 5 --duration 10 --out " + tmp / "a.pmat");
  REQUIRE(r.code == 0);
  r = pmat_cli("simulate --scene " + scene("standing.json") + " --seed 5 --duration 10 --out " + tmp / "b.pmat");
  REQUIRE(r.code == 0);
  const Session s = read_session(tmp.path / "a.pmat");
  CHECK(s.frames.size() == 1550);
  CHECK(s.diagnostics.seq_gaps == 0);
  CHECK_FALSE(s.header.start_wall_time.has_value());
  CHECK(slurp(tmp.path / "a.pmat") == slurp(tmp.path / "b.pmat"));

  r = pmat_cli("simulate --scene " + scene("standing.json") + " --seed 6 --duration 10 --out " + tmp / "c.pmat");
  REQUIRE(r.code == 0);
  CHECK(slurp(tmp.path / "a.pmat") != slurp(tmp.path / "c.pmat"));
}

TEST_CASE("empty scene reads the idle count everywhere") {
  TempDir tmp;
  REQUIRE(pmat_cli("simulate --scene " + scene("empty.json") + " --duration 0.1 --out " + tmp / "e.pmat").code == 0);
  const Session s = read_session(tmp.path / "e.pmat");
  REQUIRE(s.frames.size() == 16);  // round(0.1 * 155)
  const std::uint16_t idle = s.frames[0].counts[0];
  // Unloaded: 240 Ohm fixed leg against 30 kOhm, read across the fixed leg.
  CHECK(std::abs(idle - 4095.0 * 240.0 / 30240.0) <= 0.5);
  for (const auto& f : s.frames) {
    for (auto c : f.counts) REQUIRE(c == idle);
  }
}

TEST_CASE("analyze") {
  TempDir tmp;
  REQUIRE(pmat_cli("simulate --scene " + scene("standing.json") + " --duration 1 --out " + tmp / "s.pmat").code == 0);

  auto a = pmat_cli("analyze " + tmp / "s.pmat" + " --roi " + scene("demo_roi.json") + " --report " + tmp / "rep");
  REQUIRE(a.code == 0);
  CHECK(a.out.find("Parameters") != std::string::npos);
  CHECK(a.out.find("Mean Metatarsal Pressure") != std::string::npos);
  for (const char* ext : {".json", ".csv", ".txt"}) CHECK(fs::exists(tmp.path / (std::string("rep") + ext)));

  const auto b = pmat_cli("analyze " + tmp / "s.pmat" + " --roi " + scene("demo_roi.json"));
  CHECK(b.out == a.out);

  SUBCASE("stored report re-renders the same table") {
    const auto r = pmat_cli("report " + tmp / "rep.json");
    CHECK(r.code == 0);
    CHECK(r.out == slurp(tmp.path / "rep.txt"));
  }
  SUBCASE("capture past the end reports what is available") {
    const auto r = pmat_cli("analyze " + tmp / "s.pmat" + " --roi " + scene("demo_roi.json") + " --capture-at 120");
    CHECK(r.code == 2);
    CHECK(r.out.find("only 35 available") != std::string::npos);
  }
  SUBCASE("no regions anywhere is a data error") {
    CHECK(pmat_cli("analyze " + tmp / "s.pmat").code == 2);
  }
  SUBCASE("roi-init output is usable by analyze") {
    REQUIRE(pmat_cli("roi-init " + tmp / "s.pmat" + " --out " + tmp / "auto.json").code == 0);
    CHECK(pmat_cli("analyze " + tmp / "s.pmat" + " --roi " + tmp / "auto.json").code == 0);
  }
}

TEST_CASE("calibrate round trip through csv") {
  TempDir tmp;
  REQUIRE(pmat_cli("calibrate --simulate " + scene("standing.json") + " --emit-csv " + tmp / "s.csv" + " --out " +
                   tmp / "a.json")
              .code == 0);
  REQUIRE(pmat_cli("calibrate --csv " + tmp / "s.csv" + " --out " + tmp / "b.json").code == 0);
  CHECK(slurp(tmp.path / "a.json") == slurp(tmp.path / "b.json"));
}

TEST_CASE("exit codes") {
  CHECK(pmat_cli("").code == 1);
  CHECK(pmat_cli("bogus").code == 1);
  CHECK(pmat_cli("simulate --scene " + scene("standing.json")).code == 1);
  CHECK(pmat_cli("analyze /nonexistent.pmat").code == 1);
  TempDir tmp;
  {
    std::ofstream(tmp.path / "bad.pmat") << "not a session";
  }
  CHECK(pmat_cli("analyze " + tmp / "bad.pmat" + " --roi " + scene("demo_roi.json")).code == 2);
  CHECK(pmat_cli("--help").code == 0);
}
