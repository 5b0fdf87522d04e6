#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "c3sl/dataset.hpp"
#include "c3sl/net.hpp"
#include "c3sl/pipeline.hpp"
#include "c3sl/wire.hpp"

namespace c3sl {

// Minimal RAII TCP wrappers (loopback-grade; no TLS, no retry).
class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(TcpStream&& other) noexcept;
  TcpStream& operator=(TcpStream&& other) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream();

  static TcpStream connect(const std::string& host, std::uint16_t port);

  // Reads up to n bytes; returns 0 on orderly shutdown.
  std::size_t read_some(std::uint8_t* buf, std::size_t n);
  void write_all(const std::uint8_t* buf, std::size_t n);

  bool valid() const { return fd_ >= 0; }
  void close();

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  // port 0 binds an ephemeral port; see port().
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  TcpStream accept();
  std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Framed message channel over a byte stream, with byte accounting.
class FrameChannel {
 public:
  explicit FrameChannel(TcpStream stream) : stream_(std::move(stream)) {}

  void send(const WireMessage& msg);
  // Blocks until one complete frame arrives. Throws ProtocolError on garbage
  // and IoError when the connection drops mid-frame.
  WireMessage recv();

  std::uint64_t bytes_sent() const { return bytes_sent_; }
  std::uint64_t bytes_received() const { return bytes_received_; }

  void close() { stream_.close(); }

 private:
  TcpStream stream_;
  std::vector<std::uint8_t> rxbuf_;
  std::uint64_t bytes_sent_ = 0;
  std::uint64_t bytes_received_ = 0;
};

// Per-session transfer accounting, kept by both endpoints.
struct SessionCounters {
  std::uint64_t batches = 0;
  std::uint64_t feature_block_bytes = 0;   // compressed feature floats, forward
  std::uint64_t label_bytes = 0;
  std::uint64_t gradient_block_bytes = 0;  // compressed gradient floats, backward
  std::uint64_t frame_bytes_sent = 0;      // actual socket bytes
  std::uint64_t frame_bytes_received = 0;
};

struct EdgeResult {
  std::vector<DenseLayer> edge_layers;  // final f_theta
  std::vector<StepRecord> records;
  RunSummary summary;
  SessionCounters counters;
};

struct CloudResult {
  std::vector<DenseLayer> cloud_layers;  // final f_psi
  std::vector<double> losses;
  SessionCounters counters;
};

// Drives the full training session from the edge side: handshake, then per
// batch FEATURES out / GRADIENTS in, EPOCH_END per epoch, SHUTDOWN at the
// end. The config must use C3sl compression and 32-bit wire precision.
EdgeResult run_edge(FrameChannel& channel, const TrainConfig& cfg, const Dataset& train);

// Serves exactly one session on an accepted connection. `expected` is the
// cloud's independently configured view of the run; a digest mismatch with
// the edge's CONFIG is a handshake error.
CloudResult run_cloud(FrameChannel& channel, const TrainConfig& expected);

}  // namespace c3sl
