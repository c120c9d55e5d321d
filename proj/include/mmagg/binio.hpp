#pragma once

#include "mmagg/common.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

// Explicit little-endian scalar I/O; file formats are byte-order pinned.
namespace mmagg::binio {

inline void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint8_t get_u8(std::istream& is, const std::string& what) {
  const int c = is.get();
  if (c == std::char_traits<char>::eof()) fail("truncated file while reading " + what);
  return static_cast<std::uint8_t>(c);
}

inline std::uint16_t get_u16(std::istream& is, const std::string& what) {
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(get_u8(is, what)) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(get_u8(is, what)) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(get_u8(is, what)) << (8 * i);
  return v;
}

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_u32(is, what));
}

inline double get_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(get_u64(is, what));
}

}  // namespace mmagg::binio
