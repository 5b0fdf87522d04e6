#include "c3sl/wire.hpp"

#include <cstdlib>
#include <cstring>

#include "c3sl/bytes.hpp"
#include "c3sl/errors.hpp"

namespace c3sl {

namespace {
constexpr char kMagic[4] = {'C', '3', 'S', 'L'};

bool valid_type(std::uint8_t t) {
  return t >= static_cast<std::uint8_t>(MsgType::Config) &&
         t <= static_cast<std::uint8_t>(MsgType::Error);
}
}  // namespace

std::uint64_t max_frame_bytes() {
  if (const char* env = std::getenv("C3SL_MAX_FRAME")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return kDefaultMaxFrameBytes;
}

std::vector<std::uint8_t> frame(const WireMessage& msg) {
  if (msg.payload.size() > max_frame_bytes()) {
    throw ProtocolError("outgoing payload exceeds frame cap");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + msg.payload.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, msg.version);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  put_u32(out, static_cast<std::uint32_t>(msg.payload.size()));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

bool try_deframe(std::span<const std::uint8_t> buf, WireMessage& out, std::size_t& consumed) {
  consumed = 0;
  if (buf.size() < kFrameHeaderSize) return false;
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw ProtocolError("bad frame magic");
  }
  ByteReader r(buf.subspan(4));
  const std::uint16_t version = r.u16();
  const std::uint8_t type = r.u8();
  const std::uint32_t len = r.u32();
  if (!valid_type(type)) {
    throw ProtocolError("unknown message type " + std::to_string(type));
  }
  if (len > max_frame_bytes()) {
    throw ProtocolError("frame payload of " + std::to_string(len) + " bytes exceeds cap");
  }
  if (buf.size() < kFrameHeaderSize + len) return false;
  out.version = version;
  out.type = static_cast<MsgType>(type);
  out.payload.assign(buf.begin() + kFrameHeaderSize,
                     buf.begin() + kFrameHeaderSize + len);
  consumed = kFrameHeaderSize + len;
  return true;
}

std::vector<std::uint8_t> encode_config(const ConfigPayload& p) {
  std::vector<std::uint8_t> out;
  put_u32(out, p.cut_dim);
  put_u16(out, p.ratio);
  out.push_back(p.key_mode);
  out.push_back(p.conv_path);
  put_u32(out, p.batch);
  put_u32(out, p.num_classes);
  put_u64(out, p.key_seed);
  put_u64(out, p.model_digest);
  return out;
}

ConfigPayload decode_config(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  ConfigPayload p;
  p.cut_dim = r.u32();
  p.ratio = r.u16();
  p.key_mode = r.u8();
  p.conv_path = r.u8();
  p.batch = r.u32();
  p.num_classes = r.u32();
  p.key_seed = r.u64();
  p.model_digest = r.u64();
  if (!r.done()) throw ProtocolError("trailing bytes in CONFIG payload");
  if (p.cut_dim == 0 || p.ratio == 0 || p.batch == 0 || p.num_classes == 0) {
    throw ProtocolError("CONFIG payload with zero-valued field");
  }
  if (p.key_mode > 1 || p.conv_path > 2) {
    throw ProtocolError("CONFIG payload with unknown enum value");
  }
  return p;
}

std::vector<std::uint8_t> encode_features(const FeaturesPayload& p) {
  std::vector<std::uint8_t> out;
  put_u64(out, p.batch_id);
  put_u32(out, static_cast<std::uint32_t>(p.group_sizes.size()));
  for (std::uint16_t n : p.group_sizes) put_u16(out, n);
  for (float v : p.data) put_f32(out, v);
  for (std::uint32_t l : p.labels) put_u32(out, l);
  return out;
}

FeaturesPayload decode_features(std::span<const std::uint8_t> payload, std::size_t cut_dim) {
  ByteReader r(payload);
  FeaturesPayload p;
  p.batch_id = r.u64();
  const std::uint32_t num_groups = r.u32();
  if (num_groups == 0) throw ProtocolError("FEATURES with zero groups");
  p.group_sizes.resize(num_groups);
  std::size_t total = 0;
  for (auto& n : p.group_sizes) {
    n = r.u16();
    if (n == 0) throw ProtocolError("FEATURES with empty group");
    total += n;
  }
  const std::size_t floats = static_cast<std::size_t>(num_groups) * cut_dim;
  const std::size_t expect = floats * 4 + total * 4;
  if (r.remaining() != expect) {
    throw ProtocolError("FEATURES payload size mismatch");
  }
  p.data.resize(floats);
  for (auto& v : p.data) v = r.f32();
  p.labels.resize(total);
  for (auto& l : p.labels) l = r.u32();
  return p;
}

std::vector<std::uint8_t> encode_gradients(const GradientsPayload& p) {
  std::vector<std::uint8_t> out;
  put_u64(out, p.batch_id);
  for (float v : p.data) put_f32(out, v);
  put_f64(out, p.loss);
  return out;
}

GradientsPayload decode_gradients(std::span<const std::uint8_t> payload,
                                  std::size_t cut_dim) {
  ByteReader r(payload);
  GradientsPayload p;
  p.batch_id = r.u64();
  if (r.remaining() < 8 || (r.remaining() - 8) % 4 != 0) {
    throw ProtocolError("GRADIENTS payload size mismatch");
  }
  const std::size_t floats = (r.remaining() - 8) / 4;
  if (cut_dim == 0 || floats % cut_dim != 0) {
    throw ProtocolError("GRADIENTS block not a multiple of the cut dimension");
  }
  p.data.resize(floats);
  for (auto& v : p.data) v = r.f32();
  p.loss = r.f64();
  return p;
}

std::vector<std::uint8_t> encode_epoch_end(const EpochEndPayload& p) {
  std::vector<std::uint8_t> out;
  put_u32(out, p.epoch);
  return out;
}

EpochEndPayload decode_epoch_end(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  EpochEndPayload p;
  p.epoch = r.u32();
  if (!r.done()) throw ProtocolError("trailing bytes in EPOCH_END payload");
  return p;
}

std::vector<std::uint8_t> encode_error(const ErrorPayload& p) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(p.code));
  out.insert(out.end(), p.message.begin(), p.message.end());
  return out;
}

ErrorPayload decode_error(std::span<const std::uint8_t> payload) {
  if (payload.empty()) throw ProtocolError("empty ERROR payload");
  ErrorPayload p;
  const std::uint8_t code = payload[0];
  if (code < 1 || code > 5) throw ProtocolError("unknown ERROR code");
  p.code = static_cast<ErrCode>(code);
  p.message.assign(payload.begin() + 1, payload.end());
  return p;
}

}  // namespace c3sl
