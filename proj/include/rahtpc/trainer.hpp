#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rahtpc/codec.hpp"
#include "rahtpc/params.hpp"

namespace rahtpc {

struct TrainConfig {
  double lambda = 1.0;
  int crop_bits = 6;
  int batch_size = 10;    // training crops, drawn once and used whole every iteration
  int holdout_size = 5;   // crops for best-iterate selection
  int iterations = 100;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int root_level = 4;     // clipped to crop_bits - 1
  std::uint64_t seed = 1;
  int min_crop_points = 8;
  int max_crop_attempts = 1000;
  // Forward quantizer. Round uses straight-through gradients; Identity is
  // Q(x) = x in both passes.
  QuantMode quant = QuantMode::Round;
};

void validate(const TrainConfig& cfg);

// JSON object whose keys mirror the TrainConfig fields; absent keys keep
// their defaults.
TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

// Every *.ply file of a directory, in name order.
std::vector<VoxelizedCloud> load_corpus(const std::filesystem::path& dir, int depth);

// Crops of 2^crop_bits voxels per axis centred on random points, re-origined
// to zero. Crops with fewer than min_crop_points points are redrawn.
std::vector<VoxelizedCloud> sample_crops(std::span<const VoxelizedCloud> corpus, int count, const TrainConfig& cfg,
                                         std::mt19937_64& rng);

// A YUV crop with its parameter-independent geometry.
struct TrainingSample {
  VoxelizedCloud cloud;
  CloudGeometry geometry;
};

TrainingSample prepare_sample(VoxelizedCloud yuv, int root_level, PredictorKind predictor);

struct LagrangianReport {
  double distortion = 0.0;  // mean squared error per point and channel
  double rate = 0.0;        // proxy bits per point
  double lagrangian = 0.0;  // distortion + lambda * rate
  // Proxy bits per point per rate group: [0] root, [1 + s] level slot s.
  std::vector<double> group_rate;
  std::size_t points = 0;
};

struct ForwardOptions {
  QuantMode quant = QuantMode::Round;
  // Predicts every level from the true low-pass coefficients.
  bool oracle_predictor = false;
  // PBF guides per sample and level; see PipelineOptions::frozen_guides.
  const std::vector<std::vector<std::vector<double>>>* frozen_guides = nullptr;
};

LagrangianReport evaluate_lagrangian(std::span<const TrainingSample> batch, const ModelParams& params,
                                     double lambda, const ForwardOptions& options = {});

// Copy of `shape` with every numeric field set to zero.
ModelParams zero_gradient(const ModelParams& shape);

// Reverse-mode gradient of J with respect to every scalar of `params`,
// returned in the same shape. Bilateral weights are constants with respect to
// the signal.
LagrangianReport lagrangian_gradient(std::span<const TrainingSample> batch, const ModelParams& params,
                                     double lambda, ModelParams& gradient, const ForwardOptions& options = {});

// PBF guides of the current parameters, for use as ForwardOptions::frozen_guides.
std::vector<std::vector<std::vector<double>>> capture_guides(std::span<const TrainingSample> batch,
                                                             const ModelParams& params, QuantMode quant);

// Trainable scalars, in a fixed order. Positive quantities (kernel entries,
// step, diversities, sigmas) are optimised through their logarithm.
struct ParamGroup {
  std::string kind;  // analysis_kernel, synthesis_kernel, taylor_encoder, ...
  int slot = -1;     // level slot, -1 for global groups
  std::size_t offset = 0;
  std::size_t size = 0;
  bool log_space = false;
};

class ParamLayout {
public:
  // Groups depend on the predictor, inverse-sqrt mode, kernel tying and the
  // number of level slots in use.
  ParamLayout(const ModelParams& params, int active_slots);

  std::size_t size() const { return size_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }

  std::vector<double> pack(const ModelParams& params) const;
  void unpack(std::span<const double> theta, ModelParams& params) const;
  // Natural-space gradient to theta space.
  std::vector<double> pack_gradient(const ModelParams& params, const ModelParams& gradient) const;
  // Natural-space values in layout order, no log transform.
  std::vector<double> natural(const ModelParams& params) const;
  void set_natural(std::span<const double> values, ModelParams& params) const;

private:
  template <typename P, typename F>
  void visit(P& params, F&& f) const;

  bool pbf_ = false, linear_ = false, taylor_ = false, untied_ = false;
  int slots_ = 0;
  std::vector<ParamGroup> groups_;
  std::size_t size_ = 0;
};

// Central differences in natural space with step fd_step * max(|p|, 1) for
// every scalar of the layout; other entries of the result are zero.
ModelParams finite_difference_gradient(std::span<const TrainingSample> batch, const ModelParams& params,
                                       double lambda, const ParamLayout& layout, double fd_step,
                                       const ForwardOptions& options = {});

struct TrainLogRow {
  int iteration = 0;
  LagrangianReport train;
  double heldout_lagrangian = 0.0;
};

struct TrainResult {
  ModelParams params;             // best held-out iterate
  int best_iteration = 0;
  double initial_heldout = 0.0;
  double best_heldout = 0.0;
  std::vector<TrainLogRow> log;
  bool diverged = false;
  std::string message;
};

// Adam on theta with full-batch gradients. Returns the iterate with the
// lowest held-out J, so the result never scores worse than `init`.
TrainResult train(std::span<const VoxelizedCloud> corpus, const TrainConfig& cfg, const ModelParams& init);

// Columns: iteration,J,D,R,heldout_J,R_root,R_l<l> per level.
void write_train_log(std::ostream& out, const TrainResult& result, int depth, int root_level);

}  // namespace rahtpc
