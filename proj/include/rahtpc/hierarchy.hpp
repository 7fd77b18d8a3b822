#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rahtpc/cloud_io.hpp"
#include "rahtpc/morton.hpp"

namespace rahtpc {

// 2x2x2 kernel indexed by child offset d (see child_offset_index).
using AKernel = std::array<double, 8>;

inline constexpr AKernel unit_kernel() { return {1, 1, 1, 1, 1, 1, 1, 1}; }

// Occupied nodes per level in Morton order, l0 <= l <= depth. Because the
// codes are sorted, the children of a parent are a contiguous run at l+1.
struct LevelHierarchy {
  int depth = 0;
  int root_level = 0;
  // nodes[l]: Morton codes of occupied level-l nodes; empty for l < root_level.
  std::vector<std::vector<MortonCode>> nodes;
  // child_begin[l][i] .. child_begin[l][i+1] are the children of node i at
  // level l, as ranks into nodes[l+1]. Defined for root_level <= l < depth.
  std::vector<std::vector<std::uint32_t>> child_begin;
  // parent[l][j]: rank of the parent at level l-1 of node j at level l.
  std::vector<std::vector<std::uint32_t>> parent;
  // leaf_point[k]: index into the source cloud of the k-th leaf.
  std::vector<std::size_t> leaf_point;

  std::size_t count(int level) const { return nodes[static_cast<std::size_t>(level)].size(); }
  std::size_t num_points() const { return nodes.empty() ? 0 : nodes.back().size(); }
  int num_transform_levels() const { return depth - root_level; }

  std::uint32_t first_child(int level, std::size_t i) const {
    return child_begin[static_cast<std::size_t>(level)][i];
  }
  std::uint32_t end_child(int level, std::size_t i) const {
    return child_begin[static_cast<std::size_t>(level)][i + 1];
  }
  std::size_t block_size(int level, std::size_t i) const {
    return end_child(level, i) - first_child(level, i);
  }
  // Child offset d of node j at level `level` (level > root_level).
  int offset_of(int level, std::size_t j) const {
    return child_offset_index(nodes[static_cast<std::size_t>(level)][j]);
  }
  // Binary search for a node by coordinates; -1 when unoccupied.
  std::int64_t find(int level, const Coord3& p) const;
};

LevelHierarchy build_hierarchy(const VoxelizedCloud& cloud, int root_level);

// g[l][i] for root_level <= l <= depth; kernels[l - root_level] holds the
// analysis kernel of level l (maps level l+1 onto level l).
struct GramDiagonal {
  std::vector<std::vector<double>> g;
  const std::vector<double>& at(int level) const { return g[static_cast<std::size_t>(level)]; }
};

void check_kernels(std::span<const AKernel> kernels, int expected_levels);

GramDiagonal gram_recursion(const LevelHierarchy& h, std::span<const AKernel> kernels);

}  // namespace rahtpc
