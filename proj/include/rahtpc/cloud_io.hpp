#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "rahtpc/morton.hpp"

namespace rahtpc {

// Integer voxel positions at `depth` bits per axis with a row-major
// N x channels attribute table. Loaders return points in Morton order.
struct VoxelizedCloud {
  int depth = 0;
  std::size_t channels = 3;
  std::vector<Coord3> positions;
  std::vector<double> attributes;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  double& attribute(std::size_t point, std::size_t channel) {
    return attributes[point * channels + channel];
  }
  double attribute(std::size_t point, std::size_t channel) const {
    return attributes[point * channels + channel];
  }

  // One contiguous vector per channel.
  std::vector<std::vector<double>> channel_major() const;
  void set_channel_major(const std::vector<std::vector<double>>& planes);
};

// Throws Range/Shape errors when positions are out of the depth range,
// duplicated, or the attribute table has the wrong size.
void validate(const VoxelizedCloud& cloud);

// Sorts by Morton code and averages the attributes of duplicate voxels.
VoxelizedCloud canonicalize(VoxelizedCloud cloud);

VoxelizedCloud load_ply(const std::filesystem::path& path, int depth);

enum class PlyAttributeFormat { UInt8, Float64 };

// Binary little-endian output. UInt8 rounds and clamps to [0, 255].
void write_ply(const VoxelizedCloud& cloud, const std::filesystem::path& path,
               PlyAttributeFormat format = PlyAttributeFormat::UInt8);

// Full-range BT.709 with chroma centred on 128.
VoxelizedCloud rgb_to_yuv(const VoxelizedCloud& cloud);
VoxelizedCloud yuv_to_rgb(const VoxelizedCloud& cloud);

std::array<double, 3> rgb_to_yuv(double r, double g, double b);
std::array<double, 3> yuv_to_rgb(double y, double u, double v);

// 64-bit FNV-1a over depth and the sorted Morton codes.
std::uint64_t geometry_checksum(const VoxelizedCloud& cloud);

}  // namespace rahtpc
