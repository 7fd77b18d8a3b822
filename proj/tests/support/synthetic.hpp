#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rahtpc/cloud_io.hpp"

namespace rahtpc::testing {

// n distinct uniform voxels with uniform [lo, hi) attributes, Morton order.
VoxelizedCloud random_cloud(std::mt19937_64& rng, int depth, std::size_t n, double lo = 0.0, double hi = 255.0);

// Sphere shell over a ground plane with smooth RGB colour, a hard colour edge
// across the sphere and additive Gaussian noise. Attributes are RGB in [0, 255].
struct SceneOptions {
  int depth = 7;
  double noise = 3.0;
  std::uint64_t seed = 1;
};
VoxelizedCloud surface_scene(const SceneOptions& opt);

// Same geometry and edge layout, attributes converted to YUV.
VoxelizedCloud surface_scene_yuv(const SceneOptions& opt);

}  // namespace rahtpc::testing
