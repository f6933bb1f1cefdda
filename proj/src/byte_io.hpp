#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace ptl::detail {

inline void put_le(std::string& out, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) { put_le(out, v, 4); }
inline void put_f64(std::string& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d), 8); }

inline std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace ptl::detail
