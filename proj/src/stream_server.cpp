#include "pmat/stream_server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#include <sys/prctl.h>
#endif

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pmat/error.hpp"
#include "pmat/report_io.hpp"

namespace pmat::stream {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;
using Text = std::shared_ptr<const std::string>;

namespace {

// Sleep most of the way to the deadline, then spin; plain sleep_until wakes
// up late by a scheduler quantum often enough to dominate the jitter.
void wait_until(Clock::time_point deadline, Clock::duration spin, const std::atomic<bool>& running) {
  const auto now = Clock::now();
  if (deadline - now > spin) std::this_thread::sleep_until(deadline - spin);
  while (Clock::now() < deadline && running.load(std::memory_order_relaxed)) {
  }
}

Text make_text(const ServerMessage& m) { return std::make_shared<const std::string>(serialize(m)); }

StatusMsg status(StatusMsg::Level level, std::string event, std::string message = {}) {
  StatusMsg s;
  s.level = level;
  s.event = std::move(event);
  s.message = std::move(message);
  return s;
}

std::string content_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

}  // namespace

class Client;

struct Join {
  std::shared_ptr<Client> client;
};
struct Leave {
  std::shared_ptr<Client> client;
};
struct Incoming {
  std::shared_ptr<Client> client;
  std::string text;
};
struct ReportReady {
  ReportMsg message;
  CaptureMarker marker;
};
struct CaptureFailed {
  std::string reason;
};
using Command = std::variant<Join, Leave, Incoming, ReportReady, CaptureFailed>;

struct StreamServer::Impl {
  Impl(std::unique_ptr<FrameSource> src, CalibrationCurve c, ServerOptions o, std::optional<RegionSet> r)
      : source(std::move(src)), curve(std::move(c)), opts(std::move(o)), regions(std::move(r)) {}

  void post_command(Command c) {
    std::lock_guard lock(command_mutex);
    commands.push_back(std::move(c));
  }
  void send(const std::shared_ptr<Client>& c, Text text, bool droppable);

  void accept_loop();
  void tick_loop();
  void worker_loop();
  void apply_commands(double t);
  void handle(const std::shared_ptr<Client>& c, const ClientMessage& m);
  void on_frame(const RawFrame& frame, double t);
  void send_status(Clock::time_point now);
  void record_annotations();
  bool source_finished_locked() {
    std::lock_guard lock(finished_mutex);
    return finished;
  }

  std::unique_ptr<FrameSource> source;
  CalibrationCurve curve;
  ServerOptions opts;

  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread io_thread, tick_thread, worker_thread;
  std::atomic<bool> running{false};
  std::atomic<std::size_t> n_clients{0};
  std::atomic<std::uint64_t> total_dropped{0};

  std::mutex command_mutex;
  std::vector<Command> commands;

  // Tick-thread state.
  std::vector<std::shared_ptr<Client>> clients;
  std::optional<RegionSet> regions;
  std::vector<CaptureMarker> markers;
  std::optional<SessionWriter> recorder;
  bool capture_collecting = false;
  bool capture_busy = false;
  int capture_n = 0;
  std::vector<RawFrame> capture_frames;
  std::uint64_t next_capture_id = 1;
  RawGrid grid, raw_grid;
  Eigen::VectorXd raw_counts = Eigen::VectorXd::Zero(kChannels);
  double next_status_t = 0.0;
  std::uint64_t frames_since_status = 0;
  Clock::time_point last_status_wall{};
  double last_fps = 0.0;

  // Finished flag, visible to other threads.
  mutable std::mutex finished_mutex;
  std::condition_variable finished_cv;
  bool finished = false;

  // Tick timing.
  mutable std::mutex stats_mutex;
  std::vector<Clock::time_point> tick_times;

  // Capture worker.
  struct Job {
    std::uint64_t id;
    std::vector<RawFrame> frames;
    std::optional<RegionSet> regions;
  };
  std::mutex job_mutex;
  std::condition_variable job_cv;
  std::deque<Job> jobs;
};

// One WebSocket client. Queue and socket are touched only on the I/O thread;
// the display settings only on the tick thread.
class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, StreamServer::Impl* server) : ws_(std::move(socket)), server_(server) {}

  void accept(http::request<http::string_body> req) {
    ws_.read_message_max(1 << 20);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_->post_command(Join{self});
      self->read_loop();
    });
  }

  void enqueue(Text text, bool droppable) {
    if (closed_) return;
    queue_.push_back({std::move(text), droppable});
    while (queue_.size() > server_->opts.client_queue_limit) {
      auto begin = queue_.begin() + (writing_ ? 1 : 0);
      auto it = std::find_if(begin, queue_.end(), [](const Outgoing& o) { return o.droppable; });
      if (it == queue_.end()) break;
      queue_.erase(it);
      dropped.fetch_add(1, std::memory_order_relaxed);
      server_->total_dropped.fetch_add(1, std::memory_order_relaxed);
    }
    if (!writing_) write_next();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
    server_->post_command(Leave{shared_from_this()});
  }

  std::atomic<std::uint64_t> dropped{0};
  double display_rate_hz = kMaxDisplayRateHz;
  Subscription subscription = Subscription::processed;
  double next_field_t = 0.0;

 private:
  struct Outgoing {
    Text text;
    bool droppable;
  };

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      if (self->queue_.empty()) {
        self->writing_ = false;
        return;
      }
      self->queue_.pop_front();
      if (self->queue_.empty()) {
        self->writing_ = false;
      } else {
        self->write_next();
      }
    });
  }

  void read_loop() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_->post_command(Incoming{self, std::move(text)});
      self->read_loop();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  StreamServer::Impl* server_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  bool writing_ = false;
  bool closed_ = false;
};

void StreamServer::Impl::send(const std::shared_ptr<Client>& c, Text text, bool droppable) {
  asio::post(io, [c, text = std::move(text), droppable]() mutable { c->enqueue(std::move(text), droppable); });
}

// Plain HTTP: static UI files, or the upgrade to the /stream WebSocket.
class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, StreamServer::Impl* server) : stream_(std::move(socket)), server_(server) {}

  void run() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->on_request();
    });
  }

 private:
  void on_request() {
    const std::string target(req_.target());
    const std::string path = target.substr(0, target.find('?'));
    if (websocket::is_upgrade(req_)) {
      if (path != "/stream") return respond(http::status::not_found, "text/plain", "websocket endpoint is /stream\n");
      stream_.expires_never();
      auto client = std::make_shared<Client>(stream_.release_socket(), server_);
      client->accept(std::move(req_));
      return;
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      return respond(http::status::method_not_allowed, "text/plain", "GET only\n");
    }
    if (!server_->opts.ui_dir) return respond(http::status::not_found, "text/plain", "no UI directory configured\n");
    std::string rel = path == "/" ? "index.html" : path.substr(1);
    if (rel.find("..") != std::string::npos) return respond(http::status::bad_request, "text/plain", "bad path\n");
    const auto file = *server_->opts.ui_dir / rel;
    std::ifstream in(file, std::ios::binary);
    if (!in) return respond(http::status::not_found, "text/plain", "not found\n");
    std::ostringstream body;
    body << in.rdbuf();
    respond(http::status::ok, content_type(file), body.str());
  }

  void respond(http::status code, const std::string& type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(code, req_.version());
    res->set(http::field::server, "pmat");
    res->set(http::field::content_type, type);
    res->keep_alive(req_.keep_alive());
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->run();
    });
  }

  beast::tcp_stream stream_;
  StreamServer::Impl* server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

void StreamServer::Impl::accept_loop() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (!acceptor.is_open()) return;
    if (!ec) {
      if (opts.send_buffer_bytes > 0) {
        beast::error_code ignored;
        socket.set_option(asio::socket_base::send_buffer_size(opts.send_buffer_bytes), ignored);
      }
      std::make_shared<HttpSession>(std::move(socket), this)->run();
    }
    accept_loop();
  });
}

void StreamServer::Impl::tick_loop() {
#ifdef __linux__
  // Default timer slack is 50 us; the tick wants its wakeups on time. A
  // real-time class lets it preempt socket work at once; without the
  // privilege it stays in the normal class.
  ::prctl(PR_SET_TIMERSLACK, 1UL, 0UL, 0UL, 0UL);
  sched_param sp{};
  sp.sched_priority = 10;
  const bool realtime = ::pthread_setschedparam(::pthread_self(), SCHED_FIFO, &sp) == 0;
#else
  const bool realtime = false;
#endif
  // On a single core a normal-class spin would starve the I/O thread and cost
  // the tick its wakeup priority, so it only sleeps there. A real-time tick
  // keeps its priority and needs only a short spin.
  const Clock::duration spin = realtime ? std::chrono::microseconds(300)
                               : std::thread::hardware_concurrency() > 1 ? std::chrono::microseconds(1500)
                                                                        : Clock::duration::zero();
  const double rate = source->rate_hz();
  const auto period = std::chrono::duration<double>(1.0 / rate);
  const auto t0 = Clock::now();
  last_status_wall = t0;
  next_status_t = opts.status_interval_s;
  bool ended = false;
  for (std::uint64_t k = 0; running.load(); ++k) {
    wait_until(t0 + std::chrono::duration_cast<Clock::duration>(period * static_cast<double>(k)), spin, running);
    if (!running.load()) break;
    const auto now = Clock::now();
    {
      std::lock_guard lock(stats_mutex);
      if (!ended) tick_times.push_back(now);
    }
    const double t = static_cast<double>(k) / rate;
    apply_commands(t);
    if (!ended) {
      if (auto frame = source->next()) {
        on_frame(*frame, t);
      } else {
        ended = true;
        StatusMsg end = status(StatusMsg::Level::info, "end", "source exhausted");
        end.diagnostics = source->diagnostics();
        const Text text = make_text(end);
        for (const auto& c : clients) send(c, text, false);
        if (capture_collecting) {
          capture_collecting = false;
          const Text fail = make_text(status(StatusMsg::Level::error, "capture_failed",
                                             "source ended after " + std::to_string(capture_frames.size()) +
                                                 " of " + std::to_string(capture_n) + " capture frames"));
          for (const auto& c : clients) send(c, fail, false);
        }
        {
          std::lock_guard lock(finished_mutex);
          finished = true;
        }
        finished_cv.notify_all();
      }
    }
    if (!ended && t + 1e-9 >= next_status_t) {
      send_status(now);
      next_status_t += opts.status_interval_s;
    }
  }
}

void StreamServer::Impl::send_status(Clock::time_point now) {
  const double wall = std::chrono::duration<double>(now - last_status_wall).count();
  last_fps = wall > 0.0 ? static_cast<double>(frames_since_status) / wall : 0.0;
  frames_since_status = 0;
  last_status_wall = now;
  for (const auto& c : clients) {
    StatusMsg s = status(StatusMsg::Level::info, "tick");
    s.fps = last_fps;
    s.dropped_fields = c->dropped.load(std::memory_order_relaxed);
    s.diagnostics = source->diagnostics();
    send(c, make_text(s), false);
  }
}

void StreamServer::Impl::on_frame(const RawFrame& frame, double t) {
  ++frames_since_status;
  const CalibratedFrame cal = calibrate(curve, frame);
  reconstruct_into(source->layout(), std::span<const double>(cal.kpa.data(), cal.kpa.size()), grid);
  if (recorder) recorder->write_frame(frame);

  if (capture_collecting) {
    capture_frames.push_back(frame);
    if (static_cast<int>(capture_frames.size()) == capture_n) {
      capture_collecting = false;
      capture_busy = true;
      {
        std::lock_guard lock(job_mutex);
        jobs.push_back({next_capture_id++, std::move(capture_frames), regions});
      }
      job_cv.notify_one();
      capture_frames.clear();
    }
  }

  Text processed, raw;
  for (const auto& c : clients) {
    if (t + 1e-9 < c->next_field_t) continue;
    c->next_field_t += 1.0 / c->display_rate_hz;
    if (c->next_field_t <= t) c->next_field_t = t + 1.0 / c->display_rate_hz;
    Text& text = c->subscription == Subscription::raw ? raw : processed;
    if (!text) {
      FieldMsg f;
      f.seq = frame.seq;
      f.timestamp_us = frame.timestamp_us;
      f.mode = c->subscription;
      f.saturated_channels = cal.saturated_channels;
      if (f.mode == Subscription::raw) {
        for (int ch = 0; ch < kChannels; ++ch) raw_counts[ch] = frame.counts[ch];
        reconstruct_into(source->layout(), std::span<const double>(raw_counts.data(), kChannels), raw_grid);
        f.grid = grid_payload(raw_grid.values, raw_grid.pitch_cm, raw_grid.origin_cm, "count");
      } else {
        f.grid = grid_payload(grid.values, grid.pitch_cm, grid.origin_cm, "kPa");
      }
      text = make_text(f);
    }
    send(c, text, true);
  }
}

void StreamServer::Impl::apply_commands(double t) {
  std::vector<Command> batch;
  {
    std::lock_guard lock(command_mutex);
    batch.swap(commands);
  }
  for (auto& cmd : batch) {
    if (auto* j = std::get_if<Join>(&cmd)) {
      auto& c = j->client;
      c->display_rate_hz = opts.display_rate_hz;
      c->next_field_t = t;
      Hello h;
      h.layout = source->layout();
      h.grid_rows = h.layout.grid_rows();
      h.grid_cols = h.layout.grid_cols();
      h.calibration_id = curve.id();
      h.source_rate_hz = source->rate_hz();
      h.display_rate_hz = c->display_rate_hz;
      h.subscription = c->subscription;
      h.regions = regions;
      send(c, make_text(h), false);
      if (source_finished_locked()) send(c, make_text(status(StatusMsg::Level::info, "end", "source exhausted")), false);
      clients.push_back(c);
      n_clients.store(clients.size());
    } else if (auto* l = std::get_if<Leave>(&cmd)) {
      std::erase(clients, l->client);
      n_clients.store(clients.size());
    } else if (auto* in = std::get_if<Incoming>(&cmd)) {
      if (std::find(clients.begin(), clients.end(), in->client) == clients.end()) continue;
      try {
        handle(in->client, parse_client_message(in->text));
      } catch (const DataError& e) {
        send(in->client, make_text(status(StatusMsg::Level::error, "bad_message", e.what())), false);
      }
    } else if (auto* r = std::get_if<ReportReady>(&cmd)) {
      capture_busy = false;
      markers.push_back(r->marker);
      if (recorder) record_annotations();
      const Text text = make_text(r->message);
      for (const auto& c : clients) send(c, text, false);
    } else if (auto* f = std::get_if<CaptureFailed>(&cmd)) {
      capture_busy = false;
      const Text text = make_text(status(StatusMsg::Level::error, "capture_failed", f->reason));
      for (const auto& c : clients) send(c, text, false);
    }
  }
}

void StreamServer::Impl::handle(const std::shared_ptr<Client>& c, const ClientMessage& m) {
  using L = StatusMsg::Level;
  if (const auto* roi = std::get_if<SetRoi>(&m)) {
    const auto errors = roi->regions.validation_errors();
    if (!errors.empty()) {
      StatusMsg s = status(L::error, "roi_rejected", "regions rejected; previous regions kept");
      s.reasons = errors;
      send(c, make_text(s), false);
      return;
    }
    regions = roi->regions;
    if (recorder) record_annotations();
    send(c, make_text(status(L::info, "roi_accepted", std::to_string(regions->regions.size()) + " regions")), false);
  } else if (const auto* cap = std::get_if<Capture>(&m)) {
    if (capture_collecting || capture_busy) {
      send(c, make_text(status(L::warning, "capture_busy", "a capture is already in progress")), false);
    } else if (source_finished_locked()) {
      send(c, make_text(status(L::error, "capture_failed", "source has ended")), false);
    } else {
      capture_collecting = true;
      capture_n = cap->n_frames;
      capture_frames.clear();
      capture_frames.reserve(static_cast<std::size_t>(capture_n));
      send(c, make_text(status(L::info, "capture_started", std::to_string(capture_n) + " frames")), false);
    }
  } else if (const auto* rate = std::get_if<SetDisplayRate>(&m)) {
    c->display_rate_hz = std::min(rate->hz, kMaxDisplayRateHz);
    const bool clamped = rate->hz > kMaxDisplayRateHz;
    std::ostringstream msg;
    msg << "display rate " << c->display_rate_hz << " Hz";
    if (clamped) msg << " (capped)";
    send(c, make_text(status(clamped ? L::warning : L::info, "rate_set", msg.str())), false);
  } else if (const auto* sub = std::get_if<Subscribe>(&m)) {
    c->subscription = sub->mode;
    send(c, make_text(status(L::info, "subscribed", to_string(sub->mode))), false);
  } else if (const auto* unknown = std::get_if<UnknownMessage>(&m)) {
    send(c, make_text(status(L::warning, "unknown_type", "ignored message of unknown type '" + unknown->type + "'")),
         false);
  }
}

void StreamServer::Impl::record_annotations() {
  SessionAnnotations a;
  if (regions) a.regions = *regions;
  a.captures = markers;
  recorder->write_annotations(a);
}

void StreamServer::Impl::worker_loop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(job_mutex);
      job_cv.wait(lock, [&] { return !jobs.empty() || !running.load(); });
      if (jobs.empty()) return;
      job = std::move(jobs.front());
      jobs.pop_front();
    }
    try {
      const PressureField field = process_capture(job.frames, curve, source->layout(), opts.capture);
      ReportMsg msg;
      msg.capture_id = job.id;
      msg.first_seq = job.frames.front().seq;
      msg.frame_count = static_cast<int>(job.frames.size());
      const PressureField small = block_downsample(field, opts.report_field_downsample);
      msg.field = grid_payload(small.values, small.pitch_cm, small.origin_cm, "kPa");
      msg.notes = field.notes;
      msg.report = nullptr;
      if (job.regions) {
        try {
          msg.report = full_report(field, *job.regions, opts.contact_threshold_kpa);
        } catch (const DataError& e) {
          msg.notes.push_back(std::string("no report: ") + e.what());
        }
      } else {
        msg.notes.push_back("no report: no regions set; send set_roi first");
      }
      post_command(ReportReady{std::move(msg), {job.frames.front().seq, static_cast<std::uint32_t>(job.frames.size()),
                                                "capture-" + std::to_string(job.id)}});
    } catch (const std::exception& e) {
      post_command(CaptureFailed{e.what()});
    }
  }
}

StreamServer::StreamServer(std::unique_ptr<FrameSource> source, CalibrationCurve curve, ServerOptions options,
                           std::optional<RegionSet> regions) {
  if (!source) throw DataError("stream server: no frame source");
  if (curve.empty()) throw DataError("stream server: calibration curve is empty");
  if (!(options.display_rate_hz > 0.0)) throw DataError("stream server: display rate must be > 0");
  options.display_rate_hz = std::min(options.display_rate_hz, kMaxDisplayRateHz);
  if (regions) regions->validate();
  impl_ = std::make_unique<Impl>(std::move(source), std::move(curve), std::move(options), std::move(regions));
}

StreamServer::~StreamServer() { stop(); }

std::uint16_t StreamServer::start() {
  auto& s = *impl_;
  if (s.running.load()) return s.acceptor.local_endpoint().port();
  try {
    const tcp::endpoint ep(asio::ip::make_address(s.opts.bind_address), s.opts.port);
    s.acceptor.open(ep.protocol());
    s.acceptor.set_option(asio::socket_base::reuse_address(true));
    s.acceptor.bind(ep);
    s.acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw DataError("cannot bind " + s.opts.bind_address + ":" + std::to_string(s.opts.port) + ": " + e.what());
  }
  if (s.opts.record_path) {
    SessionHeader header = s.opts.record_header;
    header.layout = s.source->layout();
    header.calibration = s.curve;
    s.recorder.emplace(SessionWriter::create(*s.opts.record_path, header));
  }
  s.running = true;
  s.accept_loop();
  s.io_thread = std::thread([&s] {
    auto guard = asio::make_work_guard(s.io);
    s.io.run();
  });
  s.worker_thread = std::thread([&s] { s.worker_loop(); });
  s.tick_thread = std::thread([&s] { s.tick_loop(); });
  return s.acceptor.local_endpoint().port();
}

void StreamServer::stop() {
  if (!impl_) return;
  auto& s = *impl_;
  if (!s.running.exchange(false)) return;
  s.tick_thread.join();
  s.job_cv.notify_all();
  s.worker_thread.join();
  asio::post(s.io, [&s] {
    beast::error_code ignored;
    s.acceptor.close(ignored);
  });
  s.io.stop();
  s.io_thread.join();
  s.clients.clear();
  if (s.recorder) s.recorder->close();
  {
    std::lock_guard lock(s.finished_mutex);
    s.finished = true;
  }
  s.finished_cv.notify_all();
}

bool StreamServer::source_finished() const {
  std::lock_guard lock(impl_->finished_mutex);
  return impl_->finished;
}

void StreamServer::wait_finished() {
  std::unique_lock lock(impl_->finished_mutex);
  impl_->finished_cv.wait(lock, [&] { return impl_->finished; });
}

std::size_t StreamServer::client_count() const { return impl_->n_clients.load(); }

std::uint64_t StreamServer::dropped_fields() const { return impl_->total_dropped.load(); }

TickStats StreamServer::tick_stats() const {
  std::lock_guard lock(impl_->stats_mutex);
  const auto& t = impl_->tick_times;
  TickStats st;
  st.ticks = t.size();
  if (t.size() < 3) return st;
  std::vector<double> p;
  p.reserve(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) p.push_back(std::chrono::duration<double>(t[i] - t[i - 1]).count());
  double sum = 0.0;
  for (double v : p) sum += v;
  st.mean_period_s = sum / static_cast<double>(p.size());
  double ss = 0.0;
  for (double v : p) ss += (v - st.mean_period_s) * (v - st.mean_period_s);
  st.stddev_period_s = std::sqrt(ss / static_cast<double>(p.size() - 1));
  return st;
}

void StreamServer::reset_tick_stats() {
  std::lock_guard lock(impl_->stats_mutex);
  impl_->tick_times.clear();
}

}  // namespace pmat::stream
