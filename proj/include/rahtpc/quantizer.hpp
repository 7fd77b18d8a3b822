#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rahtpc {

struct QuantizerConfig {
  double step = 8.0;
  std::vector<double> channel_scale{1.0, 1.0, 1.0};

  // Effective step of one channel; channels past the scale table use 1.
  double step_for(std::size_t channel) const {
    return channel < channel_scale.size() ? step * channel_scale[channel] : step;
  }
};

void validate(const QuantizerConfig& cfg);

// round(c / step), ties away from zero.
std::int64_t quantize(double coefficient, double step);
double dequantize(std::int64_t level, double step);

std::vector<std::int64_t> quantize(std::span<const double> coefficients, double step);
std::vector<double> dequantize(std::span<const std::int64_t> levels, double step);

}  // namespace rahtpc
