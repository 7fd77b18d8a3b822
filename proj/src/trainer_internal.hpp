#pragma once

#include <vector>

#include "rahtpc/codec.hpp"
#include "rahtpc/trainer.hpp"

namespace rahtpc::detail {

struct SampleForward {
  TransformGeometry geo;
  EncodeOutput enc;
  double squared_error = 0.0;
  double bits = 0.0;
  std::vector<double> group_bits;  // [0] root, [1 + s] level slot s
};

SampleForward forward_sample(const TrainingSample& sample, const ModelParams& params, const ForwardOptions& options,
                             const std::vector<std::vector<double>>* guides, bool keep_tape);

// Adds dJ/dparams of one sample to `gradient`; d_se and d_bits are dJ/dSE and
// dJ/dbits of the whole batch.
void backward_sample(const TrainingSample& sample, const ModelParams& params, const SampleForward& fwd,
                     QuantMode quant, double d_se, double d_bits, ModelParams& gradient);

}  // namespace rahtpc::detail
