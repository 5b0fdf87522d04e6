#pragma once

#include <string>

#include "c3sl/codec.hpp"

namespace c3sl {

// Key file layout (all integers little-endian):
//   16-byte header: magic "C3KS", format version u16, reserved u16,
//                   D u32, R u16, reserved u16
//   seed u64
//   R x D key values, 32-bit IEEE-754, row-major by key index
inline constexpr std::uint16_t kKeyFileVersion = 1;

void write_keyset(const std::string& path, const KeySet& keys);

// Values come back as doubles widened from the stored 32-bit floats.
KeySet read_keyset(const std::string& path);

}  // namespace c3sl
