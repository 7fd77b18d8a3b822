#include "rahtpc/quantizer.hpp"

#include <cmath>
#include <string>

#include "rahtpc/error.hpp"

namespace rahtpc {

void validate(const QuantizerConfig& cfg) {
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step))
    fail(ErrorKind::Parameter, "quantizer step must be positive and finite");
  for (double s : cfg.channel_scale)
    if (!(s > 0.0) || !std::isfinite(s))
      fail(ErrorKind::Parameter, "quantizer channel scales must be positive and finite");
}

std::int64_t quantize(double coefficient, double step) {
  const double q = std::round(coefficient / step);
  if (!(std::abs(q) < 4.0e18))
    fail(ErrorKind::Range, "coefficient " + std::to_string(coefficient) + " overflows the quantizer");
  return static_cast<std::int64_t>(q);
}

double dequantize(std::int64_t level, double step) { return static_cast<double>(level) * step; }

std::vector<std::int64_t> quantize(std::span<const double> coefficients, double step) {
  std::vector<std::int64_t> out(coefficients.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize(coefficients[i], step);
  return out;
}

std::vector<double> dequantize(std::span<const std::int64_t> levels, double step) {
  std::vector<double> out(levels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dequantize(levels[i], step);
  return out;
}

}  // namespace rahtpc
