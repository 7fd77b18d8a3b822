#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rahtpc/bitstream.hpp"
#include "rahtpc/cloud_io.hpp"
#include "rahtpc/params.hpp"
#include "rahtpc/predictor.hpp"
#include "rahtpc/transform.hpp"

namespace rahtpc {

// Parameter-independent state of one geometry: the hierarchy and the
// predictor supports. Level vectors are indexed by l - root_level and
// describe level l+1.
struct CloudGeometry {
  LevelHierarchy hierarchy;
  std::vector<Neighborhood> neighborhoods;  // linear and PBF predictors
  std::vector<GpccStencil> gpcc;            // G-PCC baseline
  std::uint64_t checksum = 0;

  int root_level() const { return hierarchy.root_level; }
  int depth() const { return hierarchy.depth; }
};

CloudGeometry prepare_geometry(const VoxelizedCloud& cloud, int root_level, PredictorKind predictor);

// Builds kernels, Gram weights and block bases from the parameters.
TransformGeometry build_transform(const CloudGeometry& cg, const ModelParams& params);

// Transmitted coefficients per channel: the orthonormal root low-pass and,
// per level l (index l - root_level), the orthonormal high-pass residual.
struct CoefficientPyramid {
  std::vector<std::vector<double>> root;
  std::vector<std::vector<std::vector<double>>> high;

  std::size_t channels() const { return root.size(); }
  std::size_t coefficients_per_channel() const;
};

enum class QuantMode {
  Round,     // uniform scalar quantization with the configured step
  Identity,  // Q(x) = x, lossless float path
};

// Replaces the predictor output at level l+1 for one channel.
using PredictorOverride =
    std::function<std::vector<double>(int level, std::size_t channel, std::span<const double> upsampled)>;

struct PipelineOptions {
  QuantMode quant = QuantMode::Round;
  PredictorOverride predictor_override;
  // Bilateral guides per level (index l - root_level) used instead of the
  // luma upsampled field.
  const std::vector<std::vector<double>>* frozen_guides = nullptr;
  bool keep_tape = false;
};

// Intermediates of one channel at one level, all in block order for the
// high-pass quantities.
struct LevelTape {
  std::vector<double> upsampled;      // U = A_s^T F^_l
  std::vector<double> prediction;     // F-dagger
  std::vector<double> b_star;         // Z^T diag(g) F*_{l+1}
  std::vector<double> b_prime;        // Z^T diag(g) (F-dagger - U)
  std::vector<double> coded;          // residual before quantization
  std::vector<double> dequantized;
  std::vector<double> predicted;      // R_dec b_prime
  std::vector<double> highpass;       // G^
  std::vector<double> reconstructed;  // F^_{l+1}
};

struct PipelineTape {
  std::vector<LowpassPyramid> lowpass;                // [channel]
  std::vector<std::vector<double>> root_coded;        // [channel]
  std::vector<std::vector<double>> root_dequantized;  // [channel]
  std::vector<std::vector<double>> root_reconstructed;
  std::vector<std::vector<LevelTape>> levels;         // [channel][l - root_level]
  std::vector<std::vector<double>> guides;            // [l - root_level], PBF only
  std::vector<std::vector<double>> pbf_weights;       // [l - root_level], PBF only
};

struct EncodeOutput {
  CoefficientPyramid coefficients;  // before quantization
  QuantizedPyramid quantized;       // Round mode only
  // Decoder-side reconstruction, row-major N x C in the cloud's point order.
  std::vector<double> reconstruction;
  PipelineTape tape;
};

// Closed-loop analysis: prediction at every level runs on the decoder's
// reconstruction of the coarser level.
EncodeOutput encode_attributes(const CloudGeometry& cg, const TransformGeometry& geo, const ModelParams& params,
                               const VoxelizedCloud& cloud, const PipelineOptions& options = {});

// Inverse of encode_attributes given the dequantized coefficients. Output
// matches EncodeOutput::reconstruction bit for bit.
std::vector<double> decode_attributes(const CloudGeometry& cg, const TransformGeometry& geo,
                                      const ModelParams& params, const CoefficientPyramid& coefficients,
                                      const PipelineOptions& options = {});

CoefficientPyramid dequantize(const QuantizedPyramid& q, const QuantizerConfig& cfg);

BitstreamHeader make_header(const CloudGeometry& cg, const TransformGeometry& geo, const ModelParams& params,
                            std::size_t channels);

struct EncodedCloud {
  EncodedStream stream;
  EncodeOutput output;
};

// Full encoder: YUV (or any C-channel) attributes in, bitstream out.
EncodedCloud encode_cloud(const VoxelizedCloud& cloud, const ModelParams& params, int root_level);

struct DecodedCloud {
  VoxelizedCloud cloud;  // geometry positions with decoded attributes
  BitstreamHeader header;
};

// Header fields (root level, predictor, step, channel scales) override the
// corresponding parameters. Throws Geometry when the checksum differs.
DecodedCloud decode_cloud(std::span<const std::uint8_t> bytes, const VoxelizedCloud& geometry,
                          const ModelParams& params);

}  // namespace rahtpc
