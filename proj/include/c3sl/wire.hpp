#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace c3sl {

// Frame layout (all integers little-endian):
//   magic "C3SL" (4 bytes) | version u16 | msg_type u8 | payload_len u32 | payload
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 11;
inline constexpr std::uint64_t kDefaultMaxFrameBytes = 64ULL * 1024 * 1024;

enum class MsgType : std::uint8_t {
  Config = 1,
  ConfigAck = 2,
  Features = 3,
  Gradients = 4,
  EpochEnd = 5,
  Shutdown = 6,
  Error = 7,
};

enum class ErrCode : std::uint8_t {
  Version = 1,
  Digest = 2,
  Protocol = 3,
  Numeric = 4,
  Io = 5,
};

struct WireMessage {
  std::uint16_t version = kProtocolVersion;
  MsgType type = MsgType::Shutdown;
  std::vector<std::uint8_t> payload;
};

// Frame size cap; C3SL_MAX_FRAME overrides the 64 MiB default.
std::uint64_t max_frame_bytes();

std::vector<std::uint8_t> frame(const WireMessage& msg);

// Consumes one complete frame from the front of `buf` if present. Returns
// false (and consumes nothing) when more bytes are needed; throws
// ProtocolError on bad magic, unknown type, or an oversize payload.
bool try_deframe(std::span<const std::uint8_t> buf, WireMessage& out, std::size_t& consumed);

// --- payloads ---------------------------------------------------------------

struct ConfigPayload {
  std::uint32_t cut_dim = 0;
  std::uint16_t ratio = 0;
  std::uint8_t key_mode = 0;   // 0 random, 1 delta
  std::uint8_t conv_path = 0;  // 0 auto, 1 naive, 2 fft
  std::uint32_t batch = 0;
  std::uint32_t num_classes = 0;
  std::uint64_t key_seed = 0;
  std::uint64_t model_digest = 0;
};

struct FeaturesPayload {
  std::uint64_t batch_id = 0;
  std::vector<std::uint16_t> group_sizes;
  std::vector<float> data;            // num_groups x cut_dim
  std::vector<std::uint32_t> labels;  // sum(group_sizes)
};

struct GradientsPayload {
  std::uint64_t batch_id = 0;
  std::vector<float> data;  // num_groups x cut_dim
  double loss = 0.0;
};

struct EpochEndPayload {
  std::uint32_t epoch = 0;
};

struct ErrorPayload {
  ErrCode code = ErrCode::Protocol;
  std::string message;
};

std::vector<std::uint8_t> encode_config(const ConfigPayload& p);
ConfigPayload decode_config(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_features(const FeaturesPayload& p);
// cut_dim is known from the session and pins the expected geometry.
FeaturesPayload decode_features(std::span<const std::uint8_t> payload, std::size_t cut_dim);

std::vector<std::uint8_t> encode_gradients(const GradientsPayload& p);
GradientsPayload decode_gradients(std::span<const std::uint8_t> payload, std::size_t cut_dim);

std::vector<std::uint8_t> encode_epoch_end(const EpochEndPayload& p);
EpochEndPayload decode_epoch_end(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_error(const ErrorPayload& p);
ErrorPayload decode_error(std::span<const std::uint8_t> payload);

}  // namespace c3sl
