#include "pmat/frame_source.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <boost/asio.hpp>

#include "pmat/error.hpp"

namespace pmat {

namespace asio = boost::asio;
using asio::ip::tcp;

SimulatorSource::SimulatorSource(SimulatorConfig config, std::optional<double> duration_s)
    : sim_(config), layout_(config.layout), rate_(config.frame_rate_hz) {
  if (duration_s) {
    if (!(*duration_s >= 0.0)) throw DataError("simulator source: duration must be >= 0");
    limit_ = static_cast<std::uint64_t>(std::llround(*duration_s * rate_));
  }
}

std::optional<RawFrame> SimulatorSource::next() {
  if (limit_ && produced_ >= *limit_) return std::nullopt;
  ++produced_;
  return sim_.next_frame();
}

SessionSource::SessionSource(Session session, bool loop, double rate_hz)
    : session_(std::move(session)), loop_(loop), rate_(rate_hz) {
  if (!(rate_ > 0.0)) throw DataError("session source: rate must be > 0");
}

std::optional<RawFrame> SessionSource::next() {
  if (session_.frames.empty()) return std::nullopt;
  if (index_ >= session_.frames.size()) {
    if (!loop_) return std::nullopt;
    index_ = 0;
  }
  return session_.frames[index_++];
}

struct TcpDeviceSource::Impl {
  asio::io_context io;
  tcp::socket socket{io};
};

TcpDeviceSource::TcpDeviceSource(const std::string& host, std::uint16_t port, SensorLayout layout, double rate_hz)
    : impl_(std::make_unique<Impl>()), layout_(layout), rate_(rate_hz) {
  try {
    tcp::resolver resolver(impl_->io);
    asio::connect(impl_->socket, resolver.resolve(host, std::to_string(port)));
    impl_->socket.set_option(tcp::no_delay(true));
  } catch (const boost::system::system_error& e) {
    throw DataError("cannot connect to device at " + host + ":" + std::to_string(port) + ": " + e.what());
  }
}

TcpDeviceSource::~TcpDeviceSource() = default;

std::optional<RawFrame> TcpDeviceSource::next() {
  std::array<std::uint8_t, 8192> buf;
  while (pending_.empty() && !closed_) {
    boost::system::error_code ec;
    const std::size_t n = impl_->socket.read_some(asio::buffer(buf), ec);
    if (n > 0) {
      decoder_.feed(std::span<const std::uint8_t>(buf.data(), n), [&](const RawFrame& f) { pending_.push_back(f); });
    }
    if (ec) {
      decoder_.finish();
      closed_ = true;
    }
  }
  if (pending_.empty()) return std::nullopt;
  RawFrame f = pending_.front();
  pending_.pop_front();
  return f;
}

std::uint64_t run_device_link(FrameSource& source, const std::string& bind_address, std::uint16_t port,
                              const std::function<void(std::uint16_t)>& on_listening,
                              const std::atomic<bool>& stop) {
  asio::io_context io;
  tcp::acceptor acceptor(io);
  try {
    const tcp::endpoint ep(asio::ip::make_address(bind_address), port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen(1);
  } catch (const boost::system::system_error& e) {
    throw DataError("cannot listen on " + bind_address + ":" + std::to_string(port) + ": " + e.what());
  }
  if (on_listening) on_listening(acceptor.local_endpoint().port());
  tcp::socket socket(io);
  acceptor.accept(socket);
  socket.set_option(tcp::no_delay(true));

  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double>(1.0 / source.rate_hz());
  const auto start = clock::now();
  std::uint64_t sent = 0;
  while (!stop.load()) {
    const auto frame = source.next();
    if (!frame) break;
    std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(period * sent));
    const WireFrame wire = encode_frame(*frame);
    boost::system::error_code ec;
    asio::write(socket, asio::buffer(wire), ec);
    if (ec) break;
    ++sent;
  }
  boost::system::error_code ignored;
  socket.shutdown(tcp::socket::shutdown_both, ignored);
  return sent;
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  std::string host = colon == std::string::npos ? "" : text.substr(0, colon);
  const std::string port_text = colon == std::string::npos ? text : text.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) throw DataError("bad endpoint '" + text + "' (expected host:port)");
  return {host, static_cast<std::uint16_t>(port)};
}

}  // namespace pmat
