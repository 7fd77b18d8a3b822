#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rahtpc/predictor.hpp"

namespace rahtpc {

inline constexpr std::uint16_t kBitstreamVersion = 1;

struct BitstreamHeader {
  std::uint8_t depth = 0;
  std::uint8_t root_level = 0;
  PredictorKind predictor = PredictorKind::None;
  std::uint8_t channels = 3;
  double step = 1.0;
  std::vector<double> channel_scale;  // one per channel
  std::uint64_t geometry_checksum = 0;
  // Coefficient counts per group: [0] root (N_l0), then N_{l+1} - N_l for
  // l = l0 .. depth-1.
  std::vector<std::uint32_t> counts;
};

// Quantized coefficients: groups[g][c] holds the integers of group g for
// channel c, group 0 being the root low-pass.
struct QuantizedPyramid {
  std::vector<std::vector<std::vector<std::int64_t>>> groups;
};

// RLGR bytes of one segment, framing excluded.
struct SegmentSize {
  std::size_t group = 0, channel = 0, bytes = 0;
};

struct EncodedStream {
  std::vector<std::uint8_t> bytes;
  std::size_t header_bytes = 0;
  std::vector<SegmentSize> segments;

  // Entropy-coded bytes over all segments.
  std::size_t payload_bytes() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.bytes;
    return n;
  }
};

EncodedStream write_bitstream(const BitstreamHeader& header, const QuantizedPyramid& q);

struct DecodedStream {
  BitstreamHeader header;
  QuantizedPyramid pyramid;
};

// Validates magic, version, header CRC, counts, and every segment CRC.
DecodedStream read_bitstream(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rahtpc
