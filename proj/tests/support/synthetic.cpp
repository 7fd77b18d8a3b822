#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace rahtpc::testing {

VoxelizedCloud random_cloud(std::mt19937_64& rng, int depth, std::size_t n, double lo, double hi) {
  const std::uint64_t side = std::uint64_t{1} << depth;
  n = std::min<std::uint64_t>(n, side * side * side);
  std::uniform_int_distribution<std::int32_t> coord(0, static_cast<std::int32_t>(side - 1));
  std::uniform_real_distribution<double> value(lo, hi);
  std::set<MortonCode> seen;
  VoxelizedCloud cloud;
  cloud.depth = depth;
  while (cloud.positions.size() < n) {
    const Coord3 p{coord(rng), coord(rng), coord(rng)};
    if (!seen.insert(morton_encode(p)).second) continue;
    cloud.positions.push_back(p);
    for (int c = 0; c < 3; ++c) cloud.attributes.push_back(value(rng));
  }
  return canonicalize(std::move(cloud));
}

namespace {

std::array<double, 3> base_colour(const Coord3& p, double scale) {
  const double x = p[0] / scale, y = p[1] / scale, z = p[2] / scale;
  return {128.0 + 70.0 * std::sin(2.1 * x + 0.3), 120.0 + 60.0 * std::cos(1.7 * y - 0.4 * z),
          110.0 + 50.0 * std::sin(1.3 * (x + z))};
}

}  // namespace

VoxelizedCloud surface_scene(const SceneOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, opt.noise);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  const double side = std::ldexp(1.0, opt.depth);
  const double cx = side * (0.5 + jitter(rng)), cy = side * (0.5 + jitter(rng));
  const double radius = side * (0.28 + 0.5 * jitter(rng));
  const double floor_z = side * 0.12;
  const double cz = floor_z + radius + 1.0;
  const double edge_angle = std::numbers::pi * (1.0 + jitter(rng));
  const std::array<double, 3> edge_shift{-70.0, 55.0, 40.0};

  VoxelizedCloud cloud;
  cloud.depth = opt.depth;
  auto add = [&](Coord3 p, bool sphere) {
    auto rgb = base_colour(p, side / 8.0);
    if (sphere) {
      const double a = std::atan2(p[1] - cy, p[0] - cx);
      if (std::sin(a - edge_angle) > 0.0)
        for (int c = 0; c < 3; ++c) rgb[c] += edge_shift[static_cast<std::size_t>(c)];
    } else if ((p[0] / 16 + p[1] / 16) % 2 == 0) {
      for (auto& v : rgb) v *= 0.6;
    }
    cloud.positions.push_back(p);
    for (double v : rgb) cloud.attributes.push_back(std::clamp(std::round(v + noise(rng)), 0.0, 255.0));
  };

  const auto n = static_cast<std::int32_t>(side);
  const auto fz = static_cast<std::int32_t>(floor_z);
  for (std::int32_t x = 0; x < n; ++x)
    for (std::int32_t y = 0; y < n; ++y) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy > radius * radius) add({x, y, fz}, false);
    }
  const auto lo = [&](double c) { return std::max<std::int32_t>(0, static_cast<std::int32_t>(c - radius - 1)); };
  const auto hi = [&](double c) { return std::min<std::int32_t>(n - 1, static_cast<std::int32_t>(c + radius + 1)); };
  for (std::int32_t x = lo(cx); x <= hi(cx); ++x)
    for (std::int32_t y = lo(cy); y <= hi(cy); ++y)
      for (std::int32_t z = lo(cz); z <= hi(cz); ++z) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy, dz = z + 0.5 - cz;
        if (std::abs(std::sqrt(dx * dx + dy * dy + dz * dz) - radius) <= 0.87) add({x, y, z}, true);
      }
  return canonicalize(std::move(cloud));
}

VoxelizedCloud surface_scene_yuv(const SceneOptions& opt) { return rgb_to_yuv(surface_scene(opt)); }

}  // namespace rahtpc::testing
