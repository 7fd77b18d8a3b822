#pragma once

#include <array>
#include <cstdint>

namespace rahtpc {

using Coord3 = std::array<std::int32_t, 3>;
using MortonCode = std::uint64_t;

inline constexpr int kMaxDepth = 21;

namespace detail {

constexpr std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffffULL;
  v = (v | (v << 32)) & 0x1f00000000ffffULL;
  v = (v | (v << 16)) & 0x1f0000ff0000ffULL;
  v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
  v = (v | (v << 2)) & 0x1249249249249249ULL;
  return v;
}

constexpr std::uint64_t compact_bits(std::uint64_t v) {
  v &= 0x1249249249249249ULL;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
  v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
  v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
  v = (v ^ (v >> 32)) & 0x1fffffULL;
  return v;
}

}  // namespace detail

// Bit interleave with x most significant inside each 3-bit group, so the low
// three bits of a child's code are its offset d = 4*dx + 2*dy + dz.
constexpr MortonCode morton_encode(const Coord3& p) {
  return (detail::spread_bits(static_cast<std::uint64_t>(p[0])) << 2) |
         (detail::spread_bits(static_cast<std::uint64_t>(p[1])) << 1) |
         detail::spread_bits(static_cast<std::uint64_t>(p[2]));
}

constexpr Coord3 morton_decode(MortonCode code) {
  return {static_cast<std::int32_t>(detail::compact_bits(code >> 2)),
          static_cast<std::int32_t>(detail::compact_bits(code >> 1)),
          static_cast<std::int32_t>(detail::compact_bits(code))};
}

constexpr int child_offset_index(MortonCode child) { return static_cast<int>(child & 7U); }

constexpr Coord3 offset_from_index(int d) { return {(d >> 2) & 1, (d >> 1) & 1, d & 1}; }

}  // namespace rahtpc
