#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rahtpc/hierarchy.hpp"
#include "rahtpc/inv_sqrt.hpp"
#include "rahtpc/predictor.hpp"
#include "rahtpc/quantizer.hpp"
#include "rahtpc/rate_model.hpp"

namespace rahtpc {

// Trainable state of one transform level.
struct LevelParams {
  AKernel analysis_kernel = unit_kernel();
  AKernel synthesis_kernel = unit_kernel();
  std::vector<double> taylor_encoder;  // P + 1 coefficients
  std::vector<double> taylor_decoder;
  LinearPredictorParams linear = LinearPredictorParams::defaults();
  PbfParams pbf = PbfParams::defaults();
};

// Every trainable parameter of the codec. Per-level entries are indexed by
// distance from the leaves: levels[0] drives the transform between depth-1
// and depth, levels[1] the one above it, and so on. A cloud of depth L coded
// from root level l0 needs L - l0 entries.
struct ModelParams {
  static constexpr int kFormatVersion = 1;

  PredictorKind predictor = PredictorKind::None;
  InvSqrtMode inv_sqrt = InvSqrtMode::Exact;
  // Tied kernels reuse the analysis kernel for synthesis, which keeps the
  // transform exactly invertible.
  bool tied_kernels = true;
  std::vector<LevelParams> levels;
  QuantizerConfig quantizer;
  LaplaceRateModel rate_model;

  int num_levels() const { return static_cast<int>(levels.size()); }

  // RAHT(1) defaults: unit kernels, exact inverse square root, default
  // predictor parameters, Taylor order 50, PBF order 20.
  static ModelParams raht1(int num_levels, PredictorKind predictor = PredictorKind::None,
                           int taylor_order = 50, int pbf_order = 20);

  // Entry for transform level `level` of a cloud with the given depth.
  const LevelParams& level(int depth, int level) const;
  LevelParams& level(int depth, int level);
  const LaplaceParams& rate_for(int depth, int level) const;

  const AKernel& synthesis_kernel(int depth, int level) const;

  // Rate-model groups: 0 is the root, 1 + (depth - 1 - l) is level l.
  std::size_t num_rate_groups() const { return 1 + levels.size(); }
};

void validate(const ModelParams& p);

// Copy with at least `num_levels` entries; missing coarse levels repeat the
// coarsest entry and its rate model.
ModelParams with_levels(const ModelParams& p, int num_levels);

// Analysis/synthesis kernels and inverse-sqrt networks laid out per level
// (index l - root_level), ready for build_transform_geometry.
std::vector<AKernel> analysis_kernels(const ModelParams& p, int depth, int root_level);
std::vector<AKernel> synthesis_kernels(const ModelParams& p, int depth, int root_level);
InvSqrtNetworks inv_sqrt_networks(const ModelParams& p, int depth, int root_level);

std::string params_to_json(const ModelParams& p);
ModelParams params_from_json(const std::string& text);

void save_params(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace rahtpc
