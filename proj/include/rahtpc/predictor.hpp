#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rahtpc/hierarchy.hpp"
#include "rahtpc/transform.hpp"

namespace rahtpc {

enum class PredictorKind : std::uint8_t { None = 0, Linear = 1, Gpcc = 2, Pbf = 3 };

const char* to_string(PredictorKind kind);
PredictorKind parse_predictor(const std::string& name);

// 3x3x3 weights indexed by the offset k from a node to its neighbour:
// index = 9 (kx + 1) + 3 (ky + 1) + (kz + 1). Index 13 is the node itself.
using Weights27 = std::array<double, 27>;

inline constexpr int kCenterTap = 13;
constexpr int tap_index(int kx, int ky, int kz) { return 9 * (kx + 1) + 3 * (ky + 1) + (kz + 1); }
constexpr Coord3 tap_offset(int tap) { return {tap / 9 - 1, (tap / 3) % 3 - 1, tap % 3 - 1}; }

struct LinearPredictorParams {
  Weights27 w{};
  // 2^(-|k|_1): 1 at the centre, 1/2 faces, 1/4 edges, 1/8 corners.
  static LinearPredictorParams defaults();
};

struct PbfParams {
  double sigma_x = 1.0;
  double sigma_y = 20.0;
  std::vector<double> r;  // r[0] is the output gain, r[1..K] the cascade stages

  int order() const { return static_cast<int>(r.size()) - 1; }
  static PbfParams defaults(int order = 20);
};

void validate(const PbfParams& p);

// Occupied 27-neighbourhoods (self included) of every node at one level, as
// CSR lists of (neighbour rank, tap index).
struct Neighborhood {
  std::vector<std::uint32_t> begin;  // size N + 1
  std::vector<std::uint32_t> index;
  std::vector<std::uint8_t> tap;

  std::size_t size() const { return begin.empty() ? 0 : begin.size() - 1; }
};

Neighborhood build_neighborhood(const LevelHierarchy& h, int level);

// U_{l+1}[j] = w_{d_j} F_l[parent(j)]; `level` is l.
std::vector<double> upsample(const LevelHierarchy& h, const AKernel& kernel, int level,
                             std::span<const double> lowpass);

// D^-1 W U over occupied neighbours. Throws Prediction when a node's degree
// vanishes.
std::vector<double> predict_linear(std::span<const double> upsampled, const LinearPredictorParams& params,
                                   const Neighborhood& nb);

// G-PCC inverse-distance baseline: each child m_j averages the parents n_i
// with m_j - 2 n_i in {-1,..,2}^3, weighted by 1 / |(2 n_i + 1) - (m_j + 1/2)|.
struct GpccStencil {
  std::vector<std::uint32_t> begin;  // per child, size N_{l+1} + 1
  std::vector<std::uint32_t> parent;
  std::vector<double> weight;        // normalised, sums to one per child
  std::size_t fallbacks = 0;         // children with an empty support
};

GpccStencil build_gpcc_stencil(const LevelHierarchy& h, int level);

std::vector<double> predict_gpcc_baseline(std::span<const double> lowpass, const GpccStencil& stencil);

// Edge weights aligned with `nb.index`:
// exp(-|n_i - n_j|^2 / 2 sx^2) * exp(-(x_i - x_j)^2 / 2 sy^2).
std::vector<double> bilateral_weights(std::span<const double> guide, const Neighborhood& nb,
                                      double sigma_x, double sigma_y);

// r_0 * prod_{k=1..K} [(1 - r_k) I + r_k D^-1 W] applied to U, with W fixed.
std::vector<double> predict_pbf(std::span<const double> upsampled, const PbfParams& params,
                                const Neighborhood& nb, std::span<const double> weights);

// Convenience: weights computed from `upsampled` itself.
std::vector<double> predict_pbf(std::span<const double> upsampled, const PbfParams& params,
                                const Neighborhood& nb);

enum class ProjectionMode {
  FromPrediction,  // tied kernels: project P^T F directly
  FromLowpass,     // untied kernels: project dF' = P^T F - A^T F
};

// G'_l per block (psi^-1 Z^T diag(g) x), concatenated in block order.
std::vector<double> constrained_projection(const TransformGeometry& geo, int level,
                                           std::span<const double> prediction,
                                           std::span<const double> upsampled, ProjectionMode mode);

std::vector<double> residual(std::span<const double> g_star, std::span<const double> g_prime);

}  // namespace rahtpc
