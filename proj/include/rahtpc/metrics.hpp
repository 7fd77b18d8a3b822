#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rahtpc/cloud_io.hpp"
#include "rahtpc/params.hpp"

namespace rahtpc {

inline constexpr double kPsnrPeak = 255.0;

// +inf when mse == 0.
double psnr(double mse, double peak = kPsnrPeak);

struct YuvPsnr {
  double y = 0.0, u = 0.0, v = 0.0;
  // (6 y + u + v) / 8
  double combined() const;
};

// Rounds a YUV cloud to 8-bit RGB, as written by write_ply.
VoxelizedCloud to_rgb8(const VoxelizedCloud& yuv);

// PSNR per YUV channel between the original RGB cloud and the 8-bit RGB
// rendering of the decoded YUV attributes, both taken to YUV.
YuvPsnr measure_psnr(const VoxelizedCloud& original_rgb, const VoxelizedCloud& decoded_yuv);

struct RDPoint {
  double delta = 0.0;
  double bits_per_voxel = 0.0;
  double psnr_y = 0.0, psnr_u = 0.0, psnr_v = 0.0, psnr_yuv = 0.0;
  std::vector<double> level_bits;  // per coefficient group, root first
};

// Encodes and decodes `rgb` once per step. Rows follow the order of `deltas`.
std::vector<RDPoint> rd_sweep(const VoxelizedCloud& rgb, const ModelParams& params, std::span<const double> deltas,
                              int root_level);

// Messages for every pair of steps whose rate or PSNR is out of order.
std::vector<std::string> monotonicity_violations(std::span<const RDPoint> rows);

// Fixed schema: delta,bits_per_voxel,psnr_y,psnr_u,psnr_v,psnr_yuv.
// Infinite PSNR is written as "inf".
void write_rd_csv(std::ostream& out, std::span<const RDPoint> rows);
void write_rd_csv(const std::filesystem::path& path, std::span<const RDPoint> rows);

}  // namespace rahtpc
