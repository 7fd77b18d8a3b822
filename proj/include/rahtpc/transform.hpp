#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rahtpc/hierarchy.hpp"
#include "rahtpc/inv_sqrt.hpp"

namespace rahtpc {

// Complement basis for one block of m >= 2 occupied children. The first
// child in Morton order is dropped; the remaining m-1 seed the columns of Z.
struct BlockBasis {
  std::uint32_t parent = 0;       // rank at level l
  std::uint32_t first_child = 0;  // rank at level l+1
  int size = 0;                   // m
  int dropped = 0;                // index of the dropped child inside the block
  SmallVector g;                  // child Gram weights
  SmallVector a;                  // analysis kernel entries w_d per child
  double g_parent = 0.0;          // sum_j a_j^2 g_j
  SmallMatrix zmat;               // m x (m-1); a^T diag(g) zmat = 0
  SmallMatrix psi_gram;           // zmat^T diag(g) zmat
  SmallMatrix isqrt_encoder;      // psi_gram^(-1/2), encoder network
  SmallMatrix isqrt_decoder;      // psi_gram^(-1/2), decoder network

  int kept() const { return size - 1; }
};

// Needs g.size() == a.size() >= 2, g > 0, a > 0.
BlockBasis build_block_basis(std::span<const double> g_children, std::span<const double> a_row,
                             const InvSqrtConfig& encoder = {}, const InvSqrtConfig& decoder = {},
                             const std::string& context = "block");

// zmat^T diag(g) x for the block's children values x (length m).
SmallVector project_onto_complement(const BlockBasis& basis, std::span<const double> x);

// G* = psi_gram^(-1) zmat^T diag(g) F*_{l+1, block}
SmallVector analyze_highpass(std::span<const double> lowpass_children, const BlockBasis& basis);

// psi_gram^(1/2) G*, evaluated as isqrt_encoder * psi_gram * G*.
SmallVector orthonormalize(const SmallVector& g_star, const BlockBasis& basis);

// Un-normalized (F~) and normalized (F*) low-pass coefficients for
// root_level <= l <= depth, one channel.
struct LowpassPyramid {
  std::vector<std::vector<double>> unnormalized;
  std::vector<std::vector<double>> normalized;
};

// `leaf_values` are in leaf (Morton) order, see LevelHierarchy::leaf_point.
LowpassPyramid analyze_lowpass(const LevelHierarchy& h, std::span<const AKernel> kernels,
                               const GramDiagonal& gram, std::span<const double> leaf_values);

struct LevelBases {
  std::vector<BlockBasis> blocks;              // blocks with m >= 2, parent order
  std::vector<std::int32_t> block_of_parent;   // -1 for single-child parents
  std::vector<std::uint32_t> high_offset;      // start of each block in the high-pass vector
  std::size_t high_count = 0;                  // N_{l+1} - N_l
};

// Geometry-derived state shared by every channel: hierarchy, Gram weights,
// kernels and per-block bases. Level vectors are indexed by l - root_level.
struct TransformGeometry {
  LevelHierarchy hierarchy;
  GramDiagonal gram;
  std::vector<AKernel> analysis;
  std::vector<AKernel> synthesis;
  std::vector<LevelBases> levels;
  std::vector<double> root_isqrt_encoder;  // g_{l0}^(-1/2) per root node
  std::vector<double> root_isqrt_decoder;

  int root_level() const { return hierarchy.root_level; }
  int depth() const { return hierarchy.depth; }
  int num_levels() const { return hierarchy.num_transform_levels(); }
  const LevelBases& level(int l) const { return levels[static_cast<std::size_t>(l - root_level())]; }
  const AKernel& synthesis_kernel(int l) const {
    return synthesis[static_cast<std::size_t>(l - root_level())];
  }
  const AKernel& analysis_kernel(int l) const {
    return analysis[static_cast<std::size_t>(l - root_level())];
  }
};

// Inverse-square-root networks per transform level (index l - root_level);
// the root uses the entry of the root level.
struct InvSqrtNetworks {
  std::vector<InvSqrtConfig> encoder;
  std::vector<InvSqrtConfig> decoder;
};

TransformGeometry build_transform_geometry(LevelHierarchy hierarchy, std::vector<AKernel> analysis,
                                           std::vector<AKernel> synthesis,
                                           const InvSqrtNetworks& networks = {});

// One synthesis step: F^_{l+1} = A_l^T F^_l + Z_l^T G^_l, with G^ given per
// level in block order (length high_count).
std::vector<double> synthesize(const TransformGeometry& geo, int level,
                               std::span<const double> lowpass, std::span<const double> highpass);

}  // namespace rahtpc
