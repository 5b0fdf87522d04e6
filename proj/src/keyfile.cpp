#include "c3sl/keyfile.hpp"

#include <fstream>
#include <vector>

#include "c3sl/bytes.hpp"
#include "c3sl/common.hpp"
#include "c3sl/errors.hpp"

namespace c3sl {

namespace {
constexpr char kMagic[4] = {'C', '3', 'K', 'S'};
}

void write_keyset(const std::string& path, const KeySet& keys) {
  if (keys.count() > 0xFFFF) throw std::invalid_argument("key count exceeds u16 range");
  if (keys.dim() > 0xFFFFFFFFULL) throw std::invalid_argument("key dim exceeds u32 range");

  std::vector<std::uint8_t> buf;
  buf.reserve(16 + 8 + keys.param_count() * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u16(buf, kKeyFileVersion);
  put_u16(buf, 0);
  put_u32(buf, static_cast<std::uint32_t>(keys.dim()));
  put_u16(buf, static_cast<std::uint16_t>(keys.count()));
  put_u16(buf, 0);
  put_u64(buf, keys.seed());
  for (std::size_t i = 0; i < keys.count(); ++i) {
    for (double v : keys.key(i)) put_f32(buf, static_cast<float>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open key file for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to key file: " + path);
}

KeySet read_keyset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open key file: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < 24) throw IoError("key file too short: " + path);
  ByteReader r(buf);
  auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw IoError("bad key file magic: " + path);
  }
  const std::uint16_t version = r.u16();
  if (version != kKeyFileVersion) {
    throw IoError("unsupported key file version " + std::to_string(version));
  }
  r.u16();  // reserved
  const std::uint32_t dim = r.u32();
  const std::uint16_t count = r.u16();
  r.u16();  // reserved
  const std::uint64_t seed = r.u64();
  if (dim == 0 || count == 0) throw IoError("key file declares empty key set");

  const std::size_t expect = 24 + static_cast<std::size_t>(dim) * count * 4;
  if (buf.size() != expect) {
    throw IoError("key file size mismatch: expected " + std::to_string(expect) +
                  " bytes, got " + std::to_string(buf.size()));
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(dim) * count);
  for (std::size_t i = 0; i < static_cast<std::size_t>(dim) * count; ++i) {
    values.push_back(static_cast<double>(r.f32()));
  }
  return KeySet::from_values(dim, count, seed, std::move(values), KeySet::Mode::Random);
}

}  // namespace c3sl
