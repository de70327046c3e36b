#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "rgi/error.hpp"

namespace rgi::serial {

// Little-endian primitives. Reads throw TruncatedFile on short input.

inline void write_u8(std::ostream& os, uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

inline void write_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_f32(std::ostream& os, float v) {
  write_u32(os, std::bit_cast<uint32_t>(v));
}

inline uint8_t read_u8(std::istream& is) {
  const int c = is.get();
  if (c == std::char_traits<char>::eof()) throw TruncatedFile("unexpected end of file");
  return static_cast<uint8_t>(c);
}

inline uint16_t read_u16(std::istream& is) {
  char b[2];
  if (!is.read(b, 2)) throw TruncatedFile("unexpected end of file");
  return static_cast<uint16_t>(static_cast<uint8_t>(b[0]) |
                               (static_cast<uint16_t>(static_cast<uint8_t>(b[1])) << 8));
}

inline uint32_t read_u32(std::istream& is) {
  char b[4];
  if (!is.read(b, 4)) throw TruncatedFile("unexpected end of file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

inline uint64_t read_u64(std::istream& is) {
  char b[8];
  if (!is.read(b, 8)) throw TruncatedFile("unexpected end of file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

inline float read_f32(std::istream& is) {
  return std::bit_cast<float>(read_u32(is));
}

}  // namespace rgi::serial
