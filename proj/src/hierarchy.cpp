#include "rahtpc/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rahtpc/error.hpp"

namespace rahtpc {

std::int64_t LevelHierarchy::find(int level, const Coord3& p) const {
  const std::int64_t limit = std::int64_t{1} << level;
  for (auto v : p)
    if (v < 0 || v >= limit) return -1;
  const auto& codes = nodes[static_cast<std::size_t>(level)];
  const MortonCode key = morton_encode(p);
  auto it = std::lower_bound(codes.begin(), codes.end(), key);
  if (it == codes.end() || *it != key) return -1;
  return it - codes.begin();
}

LevelHierarchy build_hierarchy(const VoxelizedCloud& cloud, int root_level) {
  if (cloud.empty()) fail(ErrorKind::EmptyInput, "cannot build a hierarchy for an empty cloud");
  if (root_level < 0 || root_level >= cloud.depth)
    fail(ErrorKind::Parameter, "root level " + std::to_string(root_level) +
                                   " must satisfy 0 <= l0 < depth (" +
                                   std::to_string(cloud.depth) + ")");
  validate(cloud);

  LevelHierarchy h;
  h.depth = cloud.depth;
  h.root_level = root_level;
  const auto levels = static_cast<std::size_t>(cloud.depth) + 1;
  h.nodes.resize(levels);
  h.child_begin.resize(levels);
  h.parent.resize(levels);

  const std::size_t n = cloud.size();
  std::vector<MortonCode> codes(n);
  for (std::size_t i = 0; i < n; ++i) codes[i] = morton_encode(cloud.positions[i]);
  h.leaf_point.resize(n);
  std::iota(h.leaf_point.begin(), h.leaf_point.end(), std::size_t{0});
  std::sort(h.leaf_point.begin(), h.leaf_point.end(),
            [&](std::size_t a, std::size_t b) { return codes[a] < codes[b]; });

  auto& leaves = h.nodes.back();
  leaves.resize(n);
  for (std::size_t k = 0; k < n; ++k) leaves[k] = codes[h.leaf_point[k]];

  for (int l = cloud.depth - 1; l >= root_level; --l) {
    const auto& fine = h.nodes[static_cast<std::size_t>(l) + 1];
    auto& coarse = h.nodes[static_cast<std::size_t>(l)];
    auto& begin = h.child_begin[static_cast<std::size_t>(l)];
    auto& up = h.parent[static_cast<std::size_t>(l) + 1];
    up.resize(fine.size());
    for (std::size_t j = 0; j < fine.size(); ++j) {
      const MortonCode p = fine[j] >> 3;
      if (coarse.empty() || coarse.back() != p) {
        coarse.push_back(p);
        begin.push_back(static_cast<std::uint32_t>(j));
      }
      up[j] = static_cast<std::uint32_t>(coarse.size() - 1);
    }
    begin.push_back(static_cast<std::uint32_t>(fine.size()));
  }
  return h;
}

void check_kernels(std::span<const AKernel> kernels, int expected_levels) {
  if (static_cast<int>(kernels.size()) != expected_levels)
    fail(ErrorKind::Shape, "expected " + std::to_string(expected_levels) + " kernels, got " +
                               std::to_string(kernels.size()));
  for (std::size_t k = 0; k < kernels.size(); ++k)
    for (int d = 0; d < 8; ++d)
      if (!(kernels[k][d] > 0.0) || !std::isfinite(kernels[k][d]))
        fail(ErrorKind::Parameter, "kernel " + std::to_string(k) + " entry " + std::to_string(d) +
                                       " must be positive and finite");
}

GramDiagonal gram_recursion(const LevelHierarchy& h, std::span<const AKernel> kernels) {
  check_kernels(kernels, h.num_transform_levels());
  GramDiagonal out;
  out.g.resize(static_cast<std::size_t>(h.depth) + 1);
  out.g.back().assign(h.num_points(), 1.0);
  for (int l = h.depth - 1; l >= h.root_level; --l) {
    const auto& w = kernels[static_cast<std::size_t>(l - h.root_level)];
    const auto& fine = out.g[static_cast<std::size_t>(l) + 1];
    auto& coarse = out.g[static_cast<std::size_t>(l)];
    coarse.assign(h.count(l), 0.0);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      double s = 0.0;
      for (auto j = h.first_child(l, i); j < h.end_child(l, i); ++j) {
        const double a = w[static_cast<std::size_t>(h.offset_of(l + 1, j))];
        s += a * a * fine[j];
      }
      coarse[i] = s;
    }
  }
  return out;
}

}  // namespace rahtpc
