// pmat: command-line entry point for the pressure-mat toolkit.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 acceptance-gate failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pmat/calibration.hpp"
#include "pmat/error.hpp"
#include "pmat/field_io.hpp"
#include "pmat/frame_source.hpp"
#include "pmat/metrics.hpp"
#include "pmat/pipeline.hpp"
#include "pmat/protocol.hpp"
#include "pmat/report_io.hpp"
#include "pmat/store.hpp"
#include "pmat/stream_server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pmat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitGate = 3;

std::atomic<bool> g_interrupted{false};
extern "C" void on_signal(int) { g_interrupted = true; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// The scene file may carry its own calibration; otherwise the curve comes from
// a simulated 100 cm^2 weight sweep of the same sensor model.
CalibrationCurve curve_for(const SimulatorConfig& cfg, const std::string& calibration_path) {
  if (!calibration_path.empty()) return read_json(calibration_path).get<CalibrationCurve>();
  return build_curve(run_calibration_sweep(cfg, default_sweep_pressures()), cfg.divider);
}

SimulatorConfig load_scene(const std::string& path, std::optional<std::uint64_t> seed) {
  SimulatorConfig cfg = simulator_config_from_json(read_json(path));
  if (seed) cfg.seed = *seed;
  return cfg;
}

RegionSet load_regions(const fs::path& path) {
  try {
    RegionSet set = read_json(path).get<RegionSet>();
    set.validate();
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::min<double>(static_cast<double>(v.size() - 1), std::ceil(q * static_cast<double>(v.size())) - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
  return v[k];
}

// --- simulate ------------------------------------------------------------------

struct SimulateArgs {
  std::string scene;
  std::optional<std::uint64_t> seed;
  double duration = 10.0;
  std::string out;
  std::string listen;
  std::string calibration;
  bool wallclock = false;
};

int run_simulate(const SimulateArgs& a) {
  const SimulatorConfig cfg = load_scene(a.scene, a.seed);
  if (!a.listen.empty()) {
    SimulatorSource source(cfg, a.duration);
    const auto [host, port] = parse_endpoint(a.listen);
    const auto sent = run_device_link(source, host, port,
                                      [](std::uint16_t p) { std::cout << "listening on port " << p << std::endl; },
                                      g_interrupted);
    std::cout << "sent " << sent << " frames\n";
    return kExitOk;
  }
  SessionHeader header;
  header.layout = cfg.layout;
  header.calibration = curve_for(cfg, a.calibration);
  header.metadata = {{"tool", "pmat simulate"},
                     {"scene_file", fs::path(a.scene).filename().string()},
                     {"config", to_json(cfg)},
                     {"duration_s", a.duration}};
  if (a.wallclock) header.start_wall_time = iso_now();

  Simulator sim(cfg);
  const auto n = static_cast<std::uint64_t>(std::llround(a.duration * cfg.frame_rate_hz));
  auto writer = SessionWriter::create(a.out, header);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i = 0; i < n; ++i) {
    if (a.wallclock) {
      std::this_thread::sleep_until(t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                             std::chrono::duration<double>(sim.time_of_frame(i))));
    }
    writer.write_frame(sim.next_frame());
    if (g_interrupted) break;
  }
  writer.close();
  std::cout << "wrote " << writer.summary().frames << " frames (" << writer.summary().body_bytes
            << " body bytes) to " << a.out << "\n";
  return kExitOk;
}

// --- analyze -------------------------------------------------------------------

struct AnalyzeArgs {
  std::string session;
  std::string roi;
  std::int64_t capture_at = 0;
  int frames = kDefaultCaptureFramesCli;
  std::string report;
  std::string heatmap;
  std::string field_out;
  double threshold = kDefaultContactThresholdKpa;
  static constexpr int kDefaultCaptureFramesCli = 50;
};

int run_analyze(const AnalyzeArgs& a) {
  const Session s = read_session(a.session);
  if (a.capture_at < 0) throw DataError("--capture-at must be >= 0");
  const auto at = static_cast<std::size_t>(a.capture_at);
  const std::size_t available = at < s.frames.size() ? s.frames.size() - at : 0;
  if (available < static_cast<std::size_t>(a.frames)) {
    throw DataError("capture needs " + std::to_string(a.frames) + " frames from index " + std::to_string(at) +
                    " but the session has only " + std::to_string(available) + " available there (" +
                    std::to_string(s.frames.size()) + " in total)");
  }
  RegionSet regions;
  if (!a.roi.empty()) {
    regions = load_regions(a.roi);
  } else if (s.annotations && !s.annotations->regions.regions.empty()) {
    regions = s.annotations->regions;
  } else {
    throw DataError("no regions: pass --roi or annotate the session (see `pmat roi-init`)");
  }
  const std::span<const RawFrame> window(s.frames.data() + at, static_cast<std::size_t>(a.frames));
  const PressureField field = process_capture(window, s.header.calibration, s.header.layout);
  const MetricsReport report = full_report(field, regions, a.threshold);

  std::cout << export_report(report, ReportFormat::table);
  if (!a.report.empty()) {
    write_text(a.report + ".json", export_report(report, ReportFormat::json));
    write_text(a.report + ".csv", export_report(report, ReportFormat::csv));
    write_text(a.report + ".txt", export_report(report, ReportFormat::table));
  }
  if (!a.heatmap.empty()) write_heatmap_png(field, a.heatmap);
  if (!a.field_out.empty()) write_field(field, a.field_out);
  for (const auto& note : field.notes) std::cerr << "note: " << note << "\n";
  return kExitOk;
}

// --- bench ---------------------------------------------------------------------

struct BenchArgs {
  double seconds = 10.0;
  std::string scene;
  std::string json_out;
};

int run_bench(const BenchArgs& a) {
  SimulatorConfig cfg;
  if (!a.scene.empty()) {
    cfg = load_scene(a.scene, std::nullopt);
  } else {
    // Two feet and sensor noise: the same work per frame as a standing scene.
    for (double x : {8.0, 24.0}) {
      for (auto [dy, amp] : {std::pair{3.2, 170.0}, {11.4, 180.0}}) {
        PressureBlob b;
        b.center_cm = {x, dy};
        b.amplitude_kpa = amp;
        b.sigma_cm = {1.5, 1.5};
        cfg.scene.blobs.push_back(b);
      }
    }
    cfg.scene.noise_sigma_kpa = 3.0;
  }
  const CalibrationCurve curve = build_curve(run_calibration_sweep(cfg, default_sweep_pressures()), cfg.divider);

  static constexpr const char* kStages[] = {"render", "scan", "encode", "decode", "calibrate", "reconstruct"};
  constexpr std::size_t kN = std::size(kStages);
  std::array<std::vector<double>, kN> lat;
  for (auto& v : lat) v.reserve(static_cast<std::size_t>(a.seconds * 20000));

  Simulator sim(cfg);
  StreamDecoder decoder;
  WireFrame wire;
  Eigen::VectorXd kpa;
  RawGrid grid;
  double checksum = 0.0;
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto stop_at = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(a.seconds));
  std::uint64_t frames = 0;
  auto us = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double, std::micro>(b - a).count(); };
  while (clock::now() < stop_at) {
    const double t = sim.time_of_frame(frames);
    const auto t0 = clock::now();
    const Eigen::VectorXd p = sim.render(t);
    const auto t1 = clock::now();
    const RawFrame raw = sim.transduce(p, t);
    const auto t2 = clock::now();
    encode_frame_into(raw, wire);
    const auto t3 = clock::now();
    std::optional<RawFrame> decoded;
    decoder.feed(wire, [&](const RawFrame& f) { decoded = f; });
    const auto t4 = clock::now();
    if (!decoded) throw DataError("bench: decoder dropped a clean frame");
    calibrate_into(curve, *decoded, kpa);
    const auto t5 = clock::now();
    reconstruct_into(cfg.layout, std::span<const double>(kpa.data(), kpa.size()), grid);
    const auto t6 = clock::now();
    checksum += grid.values(16, 16);
    const clock::time_point ts[] = {t0, t1, t2, t3, t4, t5, t6};
    for (std::size_t i = 0; i < kN; ++i) lat[i].push_back(us(ts[i], ts[i + 1]));
    ++frames;
  }
  const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
  const double fps = static_cast<double>(frames) / elapsed;
  const double budget_us = 1e6 / 155.0;
  double p99_sum = 0.0;
  json out = {{"frames", frames}, {"seconds", elapsed}, {"fps", fps}, {"target_fps", 155.0},
              {"bit_rate_at_155", stream_bit_rate(155.0)}, {"stages", json::object()}};
  std::cout << std::fixed << std::setprecision(1);
  std::cout << "frames " << frames << " in " << elapsed << " s: " << fps << " fps (target 155)\n";
  std::cout << std::left << std::setw(14) << "stage" << std::right << std::setw(10) << "p50 us" << std::setw(10)
            << "p99 us" << "\n";
  for (std::size_t i = 0; i < kN; ++i) {
    const double p50 = percentile(lat[i], 0.50);
    const double p99 = percentile(lat[i], 0.99);
    p99_sum += p99;
    out["stages"][kStages[i]] = {{"p50_us", p50}, {"p99_us", p99}};
    std::cout << std::left << std::setw(14) << kStages[i] << std::right << std::setw(10) << p50 << std::setw(10) << p99
              << "\n";
  }
  const bool ok = fps >= 155.0 && p99_sum < budget_us && elapsed >= std::min(a.seconds, 10.0) - 1e-3;
  out["p99_sum_us"] = p99_sum;
  out["budget_us"] = budget_us;
  out["pass"] = ok;
  out["checksum"] = checksum;
  std::cout << "p99 sum " << p99_sum << " us of " << budget_us << " us budget\n";
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  if (!a.json_out.empty()) write_text(a.json_out, out.dump(2) + "\n");
  return ok ? kExitOk : kExitGate;
}

// --- calibrate -----------------------------------------------------------------

struct CalibrateArgs {
  std::string csv;
  std::string scene;
  std::string out;
  std::string emit_csv;
};

int run_calibrate(const CalibrateArgs& a) {
  std::vector<CalibrationSample> samples;
  DividerConfig divider;
  if (!a.csv.empty()) {
    std::ifstream in(a.csv);
    if (!in) throw DataError("cannot open " + a.csv);
    std::stringstream ss;
    ss << in.rdbuf();
    samples = parse_calibration_csv(ss.str());
  } else {
    const SimulatorConfig cfg = load_scene(a.scene, std::nullopt);
    divider = cfg.divider;
    samples = run_calibration_sweep(cfg, default_sweep_pressures());
  }
  if (!a.emit_csv.empty()) {
    std::ostringstream os;
    os << std::setprecision(17) << "pressure_kpa,count,branch\n";
    for (const auto& s : samples) {
      os << s.applied_pressure_kpa << "," << s.observed_count << ","
         << (s.branch == Branch::loading ? "loading" : "unloading") << "\n";
    }
    write_text(a.emit_csv, os.str());
  }
  const CalibrationCurve curve = build_curve(samples, divider);
  const std::string text = json(curve).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
    std::cerr << "curve " << curve.id() << " with " << curve.knots().size() << " knots written to " << a.out << "\n";
  }
  return kExitOk;
}

// --- serve / replay ------------------------------------------------------------

struct ServeArgs {
  std::string scene;
  std::string session;
  std::string connect;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string calibration;
  std::string bind = "127.0.0.1";
  std::uint16_t port = 8765;
  std::string roi;
  std::string record;
  bool loop = false;
  bool with_ui = false;
  std::string ui_dir = "ui/dist";
  double display_rate = stream::kMaxDisplayRateHz;
};

int run_serve(const ServeArgs& a) {
  std::unique_ptr<FrameSource> source;
  CalibrationCurve curve;
  SessionHeader record_header;
  if (!a.session.empty()) {
    Session s = read_session(a.session);
    curve = a.calibration.empty() ? s.header.calibration : read_json(a.calibration).get<CalibrationCurve>();
    record_header = s.header;
    source = std::make_unique<SessionSource>(std::move(s), a.loop);
  } else if (!a.connect.empty()) {
    if (a.calibration.empty()) throw DataError("--connect needs --calibration (the device sends raw counts only)");
    curve = read_json(a.calibration).get<CalibrationCurve>();
    const auto [host, port] = parse_endpoint(a.connect);
    source = std::make_unique<TcpDeviceSource>(host, port);
  } else {
    if (a.scene.empty()) throw DataError("one of --scene, --session or --connect is required");
    const SimulatorConfig cfg = load_scene(a.scene, a.seed);
    curve = curve_for(cfg, a.calibration);
    record_header.metadata = {{"tool", "pmat serve"}, {"config", to_json(cfg)}};
    source = std::make_unique<SimulatorSource>(cfg, a.duration);
  }
  stream::ServerOptions opts;
  opts.bind_address = a.bind;
  opts.port = a.port;
  opts.display_rate_hz = a.display_rate;
  if (a.with_ui) {
    if (!fs::is_directory(a.ui_dir)) throw DataError("UI directory " + a.ui_dir + " not found (build the UI first)");
    opts.ui_dir = a.ui_dir;
  }
  if (!a.record.empty()) {
    opts.record_path = a.record;
    opts.record_header = record_header;
  }
  std::optional<RegionSet> regions;
  if (!a.roi.empty()) regions = load_regions(a.roi);

  stream::StreamServer server(std::move(source), curve, opts, regions);
  const auto port = server.start();
  std::cout << "serving ws://" << a.bind << ":" << port << "/stream";
  if (opts.ui_dir) std::cout << " and http://" << a.bind << ":" << port << "/";
  std::cout << std::endl;
  while (!g_interrupted && !server.source_finished()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  // Give clients a moment to receive the final status.
  if (server.source_finished()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return kExitOk;
}

// --- report / roi-init ---------------------------------------------------------

int run_report(const std::string& path, const std::string& format) {
  const MetricsReport r = read_json(path).get<MetricsReport>();
  std::cout << export_report(r, report_format_from_string(format));
  return kExitOk;
}

int run_roi_init(const std::string& session_path, std::int64_t capture_at, int frames, const std::string& out) {
  const Session s = read_session(session_path);
  if (capture_at < 0 || static_cast<std::size_t>(capture_at) + static_cast<std::size_t>(frames) > s.frames.size()) {
    throw DataError("roi-init: session has " + std::to_string(s.frames.size()) + " frames, cannot take " +
                    std::to_string(frames) + " from index " + std::to_string(capture_at));
  }
  const std::span<const RawFrame> window(s.frames.data() + capture_at, static_cast<std::size_t>(frames));
  const PressureField avg = average_capture(window, s.header.calibration, s.header.layout);
  const RegionSet regions = auto_split_feet(avg);
  const std::string text = json(regions).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pmat: plantar pressure mat simulator, recorder and analyzer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pmat 1.0 (session format 1, stream protocol 1)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Render a scene through the sensor chain into a session file or a TCP link");
  c_sim->add_option("--scene", sim.scene, "Scene or simulator config JSON")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--seed", sim.seed, "Override the config's noise seed");
  c_sim->add_option("--duration", sim.duration, "Seconds of simulated time")->capture_default_str()->check(CLI::NonNegativeNumber);
  auto* o_out = c_sim->add_option("--out", sim.out, "Session file to write");
  auto* o_listen = c_sim->add_option("--listen", sim.listen, "Serve wire frames to one TCP client at host:port, paced at the frame rate");
  o_out->excludes(o_listen);
  c_sim->add_option("--calibration", sim.calibration, "Curve JSON to embed instead of a simulated sweep")->check(CLI::ExistingFile);
  c_sim->add_flag("--wallclock", sim.wallclock, "Pace frames in real time and stamp the session with the start time");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Process a 50-frame capture from a session and report the plantar metrics");
  c_an->add_option("session", an.session, "Session file")->required()->check(CLI::ExistingFile);
  c_an->add_option("--roi", an.roi, "Region GeoJSON (defaults to the session's annotations)")->check(CLI::ExistingFile);
  c_an->add_option("--capture-at", an.capture_at, "Index of the first captured frame")->capture_default_str();
  c_an->add_option("--frames", an.frames, "Frames to average")->capture_default_str()->check(CLI::PositiveNumber);
  c_an->add_option("--report", an.report, "Write <prefix>.json, <prefix>.csv and <prefix>.txt");
  c_an->add_option("--heatmap", an.heatmap, "Write the processed field as a PNG heatmap");
  c_an->add_option("--field-out", an.field_out, "Write the processed field as JSON header + .f32 sidecar");
  c_an->add_option("--threshold", an.threshold, "Contact threshold in kPa")->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Measure sustained single-threaded end-to-end frame rate (gate: 155 fps)");
  c_bench->add_option("--seconds", bench.seconds, "Measurement window")->capture_default_str()->check(CLI::PositiveNumber);
  c_bench->add_option("--scene", bench.scene, "Scene to render (default: built-in two-foot stance)")->check(CLI::ExistingFile);
  c_bench->add_option("--json", bench.json_out, "Also write results as JSON");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Build a counts-to-kPa curve from loading/unloading samples");
  auto* o_csv = c_cal->add_option("--csv", cal.csv, "CSV rows: pressure_kpa,count,branch")->check(CLI::ExistingFile);
  auto* o_scene = c_cal->add_option("--simulate", cal.scene, "Run the 100 cm^2 weight sweep on this config instead")->check(CLI::ExistingFile);
  o_csv->excludes(o_scene);
  c_cal->add_option("--out", cal.out, "Curve JSON (default: stdout)");
  c_cal->add_option("--emit-csv", cal.emit_csv, "Also write the samples used as CSV");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Stream live fields and reports over WebSocket from a simulator, session or device");
  auto* s_scene = c_serve->add_option("--scene", serve.scene, "Simulate this scene")->check(CLI::ExistingFile);
  auto* s_session = c_serve->add_option("--session", serve.session, "Replay this session")->check(CLI::ExistingFile);
  auto* s_connect = c_serve->add_option("--connect", serve.connect, "Read wire frames from a device at host:port");
  s_scene->excludes(s_session)->excludes(s_connect);
  s_session->excludes(s_connect);
  c_serve->add_option("--seed", serve.seed, "Override the scene's noise seed");
  c_serve->add_option("--duration", serve.duration, "Stop the simulated source after this many seconds");
  c_serve->add_option("--calibration", serve.calibration, "Curve JSON")->check(CLI::ExistingFile);
  c_serve->add_option("--bind", serve.bind, "Bind address")->capture_default_str();
  c_serve->add_option("--port", serve.port, "Port (0 picks a free one)")->capture_default_str();
  c_serve->add_option("--roi", serve.roi, "Initial regions")->check(CLI::ExistingFile);
  c_serve->add_option("--record", serve.record, "Record frames and annotations to this session file");
  c_serve->add_flag("--loop", serve.loop, "Loop a replayed session");
  c_serve->add_flag("--with-ui", serve.with_ui, "Serve the web UI's static files");
  c_serve->add_option("--ui-dir", serve.ui_dir, "Static UI directory")->capture_default_str();
  c_serve->add_option("--display-rate", serve.display_rate, "Default field rate per client in Hz (max 30)")->capture_default_str();

  ServeArgs replay;
  auto* c_replay = app.add_subcommand("replay", "Replay a recorded session as a live stream source");
  c_replay->add_option("session", replay.session, "Session file")->required()->check(CLI::ExistingFile);
  c_replay->add_option("--bind", replay.bind, "Bind address")->capture_default_str();
  c_replay->add_option("--port", replay.port, "Port (0 picks a free one)")->capture_default_str();
  c_replay->add_option("--roi", replay.roi, "Initial regions")->check(CLI::ExistingFile);
  c_replay->add_flag("--loop", replay.loop, "Start over at the end");
  c_replay->add_flag("--with-ui", replay.with_ui, "Serve the web UI's static files");
  c_replay->add_option("--ui-dir", replay.ui_dir, "Static UI directory")->capture_default_str();
  std::string replay_listen;
  c_replay->add_option("--listen", replay_listen, "Instead of WebSocket, emit raw wire frames to one TCP client at host:port");

  std::string report_path, report_format = "table";
  auto* c_report = app.add_subcommand("report", "Re-render a stored report JSON");
  c_report->add_option("report", report_path, "Report JSON written by analyze")->required()->check(CLI::ExistingFile);
  c_report->add_option("--format", report_format, "json, csv or table")->capture_default_str()->check(CLI::IsMember({"json", "csv", "table"}));

  std::string roi_session, roi_out;
  std::int64_t roi_at = 0;
  int roi_frames = 50;
  auto* c_roi = app.add_subcommand("roi-init", "Seed regions by splitting the contact area into left and right feet");
  c_roi->add_option("session", roi_session, "Session file")->required()->check(CLI::ExistingFile);
  c_roi->add_option("--capture-at", roi_at, "First frame of the averaged window")->capture_default_str();
  c_roi->add_option("--frames", roi_frames, "Frames to average")->capture_default_str()->check(CLI::PositiveNumber);
  c_roi->add_option("--out", roi_out, "Region GeoJSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*c_sim) {
      if (sim.out.empty() && sim.listen.empty()) {
        std::cerr << "simulate: one of --out or --listen is required\n";
        return kExitUsage;
      }
      return run_simulate(sim);
    }
    if (*c_an) return run_analyze(an);
    if (*c_bench) return run_bench(bench);
    if (*c_cal) {
      if (cal.csv.empty() && cal.scene.empty()) {
        std::cerr << "calibrate: one of --csv or --simulate is required\n";
        return kExitUsage;
      }
      return run_calibrate(cal);
    }
    if (*c_serve) return run_serve(serve);
    if (*c_replay) {
      if (!replay_listen.empty()) {
        SessionSource source(read_session(replay.session), replay.loop);
        const auto [host, port] = parse_endpoint(replay_listen);
        const auto sent = run_device_link(source, host, port,
                                          [](std::uint16_t p) { std::cout << "listening on port " << p << std::endl; },
                                          g_interrupted);
        std::cout << "sent " << sent << " frames\n";
        return kExitOk;
      }
      return run_serve(replay);
    }
    if (*c_report) return run_report(report_path, report_format);
    if (*c_roi) return run_roi_init(roi_session, roi_at, roi_frames, roi_out);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
