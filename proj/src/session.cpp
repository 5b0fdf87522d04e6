#include "c3sl/session.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "c3sl/errors.hpp"

namespace c3sl {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw IoError(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
  } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw IoError("invalid IPv4 address: " + host);
  }
  return addr;
}

}  // namespace

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

TcpStream::~TcpStream() { close(); }

void TcpStream::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");
  TcpStream stream(fd);
  sockaddr_in addr = make_addr(host == "localhost" ? "127.0.0.1" : host, port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw_errno("connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return stream;
}

std::size_t TcpStream::read_some(std::uint8_t* buf, std::size_t n) {
  if (fd_ < 0) throw IoError("read on closed socket");
  for (;;) {
    const ssize_t rv = ::recv(fd_, buf, n, 0);
    if (rv >= 0) return static_cast<std::size_t>(rv);
    if (errno == EINTR) continue;
    throw_errno("recv");
  }
}

void TcpStream::write_all(const std::uint8_t* buf, std::size_t n) {
  if (fd_ < 0) throw IoError("write on closed socket");
  while (n > 0) {
    const ssize_t rv = ::send(fd_, buf, n, MSG_NOSIGNAL);
    if (rv < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    buf += rv;
    n -= static_cast<std::size_t>(rv);
  }
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host == "localhost" ? "127.0.0.1" : host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    errno = err;
    throw_errno("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd_, 4) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    errno = err;
    throw_errno("listen");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) != 0) {
    throw_errno("getsockname");
  }
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

TcpStream TcpListener::accept() {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return TcpStream(fd);
    }
    if (errno == EINTR) continue;
    throw_errno("accept");
  }
}

void FrameChannel::send(const WireMessage& msg) {
  const auto bytes = frame(msg);
  stream_.write_all(bytes.data(), bytes.size());
  bytes_sent_ += bytes.size();
}

WireMessage FrameChannel::recv() {
  WireMessage msg;
  std::size_t consumed = 0;
  while (!try_deframe(rxbuf_, msg, consumed)) {
    std::uint8_t chunk[16384];
    const std::size_t got = stream_.read_some(chunk, sizeof(chunk));
    if (got == 0) {
      throw IoError(rxbuf_.empty() ? "connection closed" : "connection dropped mid-frame");
    }
    rxbuf_.insert(rxbuf_.end(), chunk, chunk + got);
    bytes_received_ += got;
  }
  rxbuf_.erase(rxbuf_.begin(), rxbuf_.begin() + static_cast<std::ptrdiff_t>(consumed));
  return msg;
}

namespace {

void send_error(FrameChannel& channel, ErrCode code, const std::string& message) {
  try {
    channel.send({kProtocolVersion, MsgType::Error, encode_error({code, message})});
  } catch (const IoError&) {
    // peer already gone; the local throw below still reports the cause
  }
}

[[noreturn]] void throw_remote_error(const ErrorPayload& err) {
  const std::string what = "peer reported error: " + err.message;
  switch (err.code) {
    case ErrCode::Numeric:
      throw NumericError(what);
    case ErrCode::Io:
      throw IoError(what);
    default:
      throw ProtocolError(what);
  }
}

std::vector<float> narrow_to_f32(std::span<const double> xs) {
  std::vector<float> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = static_cast<float>(xs[i]);
  return out;
}

std::vector<double> widen_to_f64(std::span<const float> xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = static_cast<double>(xs[i]);
  return out;
}

void check_transport_config(const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.compression != Compression::C3sl) {
    throw std::invalid_argument("transport sessions always run the codec; use ratio 1 "
                                "with delta keys for the vanilla configuration");
  }
  if (!cfg.wire_float32) {
    throw std::invalid_argument("the wire carries 32-bit floats; wire_float32 must be on");
  }
}

ConfigPayload config_payload_for(const TrainConfig& cfg) {
  ConfigPayload p;
  p.cut_dim = static_cast<std::uint32_t>(cfg.cut_dim);
  p.ratio = static_cast<std::uint16_t>(cfg.ratio);
  p.key_mode = static_cast<std::uint8_t>(cfg.key_mode);
  p.conv_path = static_cast<std::uint8_t>(cfg.conv_path);
  p.batch = static_cast<std::uint32_t>(cfg.batch);
  p.num_classes = static_cast<std::uint32_t>(cfg.num_classes);
  p.key_seed = cfg.key_seed;
  p.model_digest = config_digest(cfg);
  return p;
}

}  // namespace

EdgeResult run_edge(FrameChannel& channel, const TrainConfig& cfg, const Dataset& train) {
  check_transport_config(cfg);
  if (train.size() == 0) throw std::invalid_argument("empty training dataset");

  channel.send({kProtocolVersion, MsgType::Config, encode_config(config_payload_for(cfg))});
  {
    const WireMessage reply = channel.recv();
    if (reply.type == MsgType::Error) throw_remote_error(decode_error(reply.payload));
    if (reply.type != MsgType::ConfigAck) {
      throw ProtocolError("expected CONFIG_ACK, got message type " +
                          std::to_string(static_cast<int>(reply.type)));
    }
  }

  SplitModel model = make_model(cfg);
  EdgeRuntime runtime(std::move(model.edge), make_keys(cfg), cfg);

  EdgeResult result;
  std::uint64_t batch_id = 0;
  std::uint64_t cumulative = 0;
  const auto run_start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), cfg, epoch);
    for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch) {
      const std::size_t rows = std::min(cfg.batch, train.size() - begin);
      Matrix x;
      std::vector<std::uint32_t> labels;
      gather_batch(train, order, begin, rows, x, labels);

      const auto t0 = std::chrono::steady_clock::now();
      EncodedBatch enc = runtime.forward(x, labels);

      FeaturesPayload features;
      features.batch_id = batch_id;
      features.group_sizes = enc.group_sizes;
      features.data = narrow_to_f32(enc.data);
      features.labels = enc.labels;
      channel.send({kProtocolVersion, MsgType::Features, encode_features(features)});

      const WireMessage reply = channel.recv();
      if (reply.type == MsgType::Error) throw_remote_error(decode_error(reply.payload));
      if (reply.type != MsgType::Gradients) {
        throw ProtocolError("expected GRADIENTS, got message type " +
                            std::to_string(static_cast<int>(reply.type)));
      }
      const GradientsPayload grads = decode_gradients(reply.payload, cfg.cut_dim);
      if (grads.batch_id != batch_id) {
        send_error(channel, ErrCode::Protocol, "gradient batch id out of order");
        throw ProtocolError("GRADIENTS batch id " + std::to_string(grads.batch_id) +
                            ", expected " + std::to_string(batch_id));
      }
      if (grads.data.size() != enc.data.size()) {
        send_error(channel, ErrCode::Protocol, "gradient block size mismatch");
        throw ProtocolError("GRADIENTS block size mismatch");
      }
      if (!std::isfinite(grads.loss)) {
        send_error(channel, ErrCode::Numeric, "non-finite loss");
        throw NumericError("received non-finite loss");
      }
      runtime.backward(widen_to_f64(grads.data));
      const auto t1 = std::chrono::steady_clock::now();

      result.counters.batches += 1;
      result.counters.feature_block_bytes += features.data.size() * 4;
      result.counters.label_bytes += features.labels.size() * 4;
      result.counters.gradient_block_bytes += grads.data.size() * 4;

      if (result.summary.steps == 0) result.summary.first_loss = grads.loss;
      result.summary.final_loss = grads.loss;
      result.summary.steps += 1;
      result.summary.forward_feature_bytes += features.data.size() * 4;
      result.summary.forward_label_bytes += features.labels.size() * 4;
      result.summary.backward_feature_bytes += grads.data.size() * 4;
      cumulative += features.data.size() * 4 + grads.data.size() * 4;

      StepRecord rec;
      rec.step = result.summary.steps;
      rec.epoch = epoch + 1;
      rec.loss = grads.loss;
      rec.forward_bytes = features.data.size() * 4;
      rec.backward_bytes = grads.data.size() * 4;
      rec.cumulative_bytes = cumulative;
      rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      result.records.push_back(rec);

      ++batch_id;
    }
    channel.send({kProtocolVersion, MsgType::EpochEnd,
                  encode_epoch_end({static_cast<std::uint32_t>(epoch + 1)})});
  }

  channel.send({kProtocolVersion, MsgType::Shutdown, {}});

  result.summary.epochs = cfg.epochs;
  result.summary.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - run_start)
          .count();
  if (result.summary.forward_feature_bytes > 0) {
    std::uint64_t vanilla = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch) {
        vanilla += std::min(cfg.batch, train.size() - begin) * cfg.cut_dim * 4;
      }
    }
    result.summary.achieved_ratio = static_cast<double>(vanilla) /
                                    static_cast<double>(result.summary.forward_feature_bytes);
  }
  result.counters.frame_bytes_sent = channel.bytes_sent();
  result.counters.frame_bytes_received = channel.bytes_received();
  result.edge_layers = runtime.half().layers();
  return result;
}

CloudResult run_cloud(FrameChannel& channel, const TrainConfig& expected) {
  check_transport_config(expected);

  // --- handshake ---
  {
    const WireMessage first = channel.recv();
    if (first.version != kProtocolVersion) {
      send_error(channel, ErrCode::Version,
                 "protocol version " + std::to_string(first.version) + " unsupported");
      throw ProtocolError("protocol version mismatch: " + std::to_string(first.version));
    }
    if (first.type != MsgType::Config) {
      send_error(channel, ErrCode::Protocol, "session must start with CONFIG");
      throw ProtocolError("first message was type " +
                          std::to_string(static_cast<int>(first.type)) + ", not CONFIG");
    }
    const ConfigPayload cfg_msg = decode_config(first.payload);
    if (cfg_msg.model_digest != config_digest(expected)) {
      send_error(channel, ErrCode::Digest, "configuration digest mismatch");
      throw ProtocolError("configuration digest mismatch");
    }
    channel.send({kProtocolVersion, MsgType::ConfigAck, {}});
  }

  SplitModel model = make_model(expected);
  CloudRuntime runtime(std::move(model.cloud), make_keys(expected), expected);

  CloudResult result;
  std::uint64_t expected_batch = 0;
  bool running = true;
  while (running) {
    const WireMessage msg = channel.recv();
    switch (msg.type) {
      case MsgType::Features: {
        FeaturesPayload features = decode_features(msg.payload, expected.cut_dim);
        if (features.batch_id != expected_batch) {
          send_error(channel, ErrCode::Protocol, "unexpected batch id");
          throw ProtocolError("FEATURES batch id " + std::to_string(features.batch_id) +
                              ", expected " + std::to_string(expected_batch));
        }
        for (std::uint16_t n : features.group_sizes) {
          if (n > expected.ratio) {
            send_error(channel, ErrCode::Protocol, "group larger than the ratio");
            throw ProtocolError("group of " + std::to_string(n) + " exceeds ratio");
          }
        }

        GradientsPayload reply;
        reply.batch_id = features.batch_id;
        try {
          const CloudRuntime::Result r = runtime.process(
              features.group_sizes, widen_to_f64(features.data), features.labels);
          if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
          reply.loss = r.loss;
          reply.data = narrow_to_f32(r.grad_compressed);
        } catch (const NumericError& e) {
          send_error(channel, ErrCode::Numeric, e.what());
          throw;
        } catch (const std::invalid_argument& e) {
          send_error(channel, ErrCode::Protocol, e.what());
          throw ProtocolError(e.what());
        }
        channel.send({kProtocolVersion, MsgType::Gradients, encode_gradients(reply)});

        result.losses.push_back(reply.loss);
        result.counters.batches += 1;
        result.counters.feature_block_bytes += features.data.size() * 4;
        result.counters.label_bytes += features.labels.size() * 4;
        result.counters.gradient_block_bytes += reply.data.size() * 4;
        ++expected_batch;
        break;
      }
      case MsgType::EpochEnd:
        decode_epoch_end(msg.payload);
        break;
      case MsgType::Shutdown:
        running = false;
        break;
      case MsgType::Error:
        throw_remote_error(decode_error(msg.payload));
      default:
        send_error(channel, ErrCode::Protocol, "message not valid in this phase");
        throw ProtocolError("message type " + std::to_string(static_cast<int>(msg.type)) +
                            " not valid in this phase");
    }
  }

  result.counters.frame_bytes_sent = channel.bytes_sent();
  result.counters.frame_bytes_received = channel.bytes_received();
  result.cloud_layers = runtime.half().layers();
  return result;
}

}  // namespace c3sl
