#include "rahtpc/transform.hpp"

#include <cmath>
#include <string>

#include "rahtpc/error.hpp"

namespace rahtpc {

BlockBasis build_block_basis(std::span<const double> g_children, std::span<const double> a_row,
                             const InvSqrtConfig& encoder, const InvSqrtConfig& decoder,
                             const std::string& context) {
  const auto m = static_cast<int>(g_children.size());
  if (m < 2 || m > 8 || a_row.size() != g_children.size())
    fail(ErrorKind::Shape, context + ": a block basis needs 2..8 children with matching weights");
  BlockBasis b;
  b.size = m;
  b.dropped = 0;
  b.g.resize(m);
  b.a.resize(m);
  for (int k = 0; k < m; ++k) {
    b.g(k) = g_children[static_cast<std::size_t>(k)];
    b.a(k) = a_row[static_cast<std::size_t>(k)];
    if (!(b.g(k) > 0.0) || !(b.a(k) > 0.0))
      fail(ErrorKind::Parameter, context + ": Gram weights and kernel entries must be positive");
  }
  b.g_parent = (b.a.array().square() * b.g.array()).sum();

  // Column c seeds child c+1: e_{c+1} - a (a_{c+1} g_{c+1}) / g_parent.
  b.zmat = SmallMatrix::Zero(m, m - 1);
  for (int c = 0; c < m - 1; ++c) {
    const double u = b.a(c + 1) * b.g(c + 1) / b.g_parent;
    b.zmat.col(c) = -u * b.a;
    b.zmat(c + 1, c) += 1.0;
  }
  b.psi_gram = b.zmat.transpose() * b.g.asDiagonal() * b.zmat;
  b.psi_gram = (0.5 * (b.psi_gram + b.psi_gram.transpose())).eval();
  b.isqrt_encoder = inv_sqrt_spd(b.psi_gram, encoder, context);
  b.isqrt_decoder = decoder.mode == encoder.mode &&
                                (encoder.mode == InvSqrtMode::Exact ||
                                 decoder.coefficients.data() == encoder.coefficients.data())
                        ? b.isqrt_encoder
                        : inv_sqrt_spd(b.psi_gram, decoder, context);
  return b;
}

SmallVector project_onto_complement(const BlockBasis& basis, std::span<const double> x) {
  if (static_cast<int>(x.size()) != basis.size)
    fail(ErrorKind::Shape, "block value count does not match block size");
  SmallVector gx(basis.size);
  for (int k = 0; k < basis.size; ++k) gx(k) = basis.g(k) * x[static_cast<std::size_t>(k)];
  return basis.zmat.transpose() * gx;
}

SmallVector analyze_highpass(std::span<const double> lowpass_children, const BlockBasis& basis) {
  const SmallVector rhs = project_onto_complement(basis, lowpass_children);
  Eigen::LDLT<SmallMatrix> ldlt(basis.psi_gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    fail(ErrorKind::Conditioning, "block at parent " + std::to_string(basis.parent) +
                                      ": singular complement Gram matrix");
  return ldlt.solve(rhs);
}

SmallVector orthonormalize(const SmallVector& g_star, const BlockBasis& basis) {
  return basis.isqrt_encoder * (basis.psi_gram * g_star);
}

LowpassPyramid analyze_lowpass(const LevelHierarchy& h, std::span<const AKernel> kernels,
                               const GramDiagonal& gram, std::span<const double> leaf_values) {
  if (leaf_values.size() != h.num_points())
    fail(ErrorKind::Shape, "attribute length " + std::to_string(leaf_values.size()) +
                               " does not match " + std::to_string(h.num_points()) + " points");
  check_kernels(kernels, h.num_transform_levels());
  LowpassPyramid out;
  const auto levels = static_cast<std::size_t>(h.depth) + 1;
  out.unnormalized.resize(levels);
  out.normalized.resize(levels);
  out.unnormalized.back().assign(leaf_values.begin(), leaf_values.end());
  out.normalized.back() = out.unnormalized.back();
  for (int l = h.depth - 1; l >= h.root_level; --l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& w = kernels[static_cast<std::size_t>(l - h.root_level)];
    const auto& fine = out.unnormalized[li + 1];
    auto& coarse = out.unnormalized[li];
    coarse.assign(h.count(l), 0.0);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      double s = 0.0;
      for (auto j = h.first_child(l, i); j < h.end_child(l, i); ++j)
        s += w[static_cast<std::size_t>(h.offset_of(l + 1, j))] * fine[j];
      coarse[i] = s;
    }
    auto& norm = out.normalized[li];
    norm.resize(coarse.size());
    const auto& g = gram.at(l);
    for (std::size_t i = 0; i < coarse.size(); ++i) norm[i] = coarse[i] / g[i];
  }
  return out;
}

TransformGeometry build_transform_geometry(LevelHierarchy hierarchy, std::vector<AKernel> analysis,
                                           std::vector<AKernel> synthesis,
                                           const InvSqrtNetworks& networks) {
  TransformGeometry geo;
  geo.hierarchy = std::move(hierarchy);
  const auto& h = geo.hierarchy;
  const int levels = h.num_transform_levels();
  check_kernels(analysis, levels);
  check_kernels(synthesis, levels);
  geo.analysis = std::move(analysis);
  geo.synthesis = std::move(synthesis);
  geo.gram = gram_recursion(h, geo.analysis);

  auto network = [&](const std::vector<InvSqrtConfig>& v, int index) {
    if (v.empty()) return InvSqrtConfig{};
    if (static_cast<int>(v.size()) != levels)
      fail(ErrorKind::Shape, "inverse-sqrt network count does not match the level count");
    return v[static_cast<std::size_t>(index)];
  };

  geo.levels.resize(static_cast<std::size_t>(levels));
  for (int l = h.root_level; l < h.depth; ++l) {
    const int idx = l - h.root_level;
    const auto enc = network(networks.encoder, idx);
    const auto dec = network(networks.decoder, idx);
    auto& lb = geo.levels[static_cast<std::size_t>(idx)];
    const auto& w = geo.analysis[static_cast<std::size_t>(idx)];
    const auto& g_fine = geo.gram.at(l + 1);
    lb.block_of_parent.assign(h.count(l), -1);
    std::array<double, 8> gs{}, as{};
    for (std::size_t i = 0; i < h.count(l); ++i) {
      const auto first = h.first_child(l, i);
      const auto m = h.block_size(l, i);
      if (m < 2) continue;
      for (std::size_t k = 0; k < m; ++k) {
        gs[k] = g_fine[first + k];
        as[k] = w[static_cast<std::size_t>(h.offset_of(l + 1, first + k))];
      }
      BlockBasis b = build_block_basis(std::span(gs.data(), m), std::span(as.data(), m), enc, dec,
                                       "level " + std::to_string(l) + " block " + std::to_string(i));
      b.parent = static_cast<std::uint32_t>(i);
      b.first_child = first;
      lb.block_of_parent[i] = static_cast<std::int32_t>(lb.blocks.size());
      lb.high_offset.push_back(static_cast<std::uint32_t>(lb.high_count));
      lb.high_count += m - 1;
      lb.blocks.push_back(std::move(b));
    }
  }

  const auto enc = network(networks.encoder, 0);
  const auto dec = network(networks.decoder, 0);
  const auto& g_root = geo.gram.at(h.root_level);
  geo.root_isqrt_encoder.resize(g_root.size());
  geo.root_isqrt_decoder.resize(g_root.size());
  for (std::size_t i = 0; i < g_root.size(); ++i) {
    SmallMatrix m(1, 1);
    m(0, 0) = g_root[i];
    const std::string ctx = "root node " + std::to_string(i);
    geo.root_isqrt_encoder[i] = inv_sqrt_spd(m, enc, ctx)(0, 0);
    geo.root_isqrt_decoder[i] = inv_sqrt_spd(m, dec, ctx)(0, 0);
  }
  return geo;
}

std::vector<double> synthesize(const TransformGeometry& geo, int level,
                               std::span<const double> lowpass, std::span<const double> highpass) {
  const auto& h = geo.hierarchy;
  const auto& lb = geo.level(level);
  if (lowpass.size() != h.count(level) || highpass.size() != lb.high_count)
    fail(ErrorKind::Shape, "synthesis inputs do not match level " + std::to_string(level));
  const auto& w = geo.synthesis_kernel(level);
  std::vector<double> out(h.count(level + 1));
  for (std::size_t i = 0; i < h.count(level); ++i) {
    const auto first = h.first_child(level, i);
    const auto last = h.end_child(level, i);
    for (auto j = first; j < last; ++j)
      out[j] = w[static_cast<std::size_t>(h.offset_of(level + 1, j))] * lowpass[i];
    const auto bi = lb.block_of_parent[i];
    if (bi < 0) continue;
    const auto& b = lb.blocks[static_cast<std::size_t>(bi)];
    const auto off = lb.high_offset[static_cast<std::size_t>(bi)];
    for (int c = 0; c < b.kept(); ++c) {
      const double gh = highpass[off + static_cast<std::size_t>(c)];
      for (int k = 0; k < b.size; ++k) out[first + static_cast<std::size_t>(k)] += b.zmat(k, c) * gh;
    }
  }
  return out;
}

}  // namespace rahtpc
