#include "rahtpc/rate_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rahtpc/error.hpp"

namespace rahtpc {

namespace {
void check_model(const LaplaceParams& p, double step) {
  if (!(p.diversity > 0.0) || !std::isfinite(p.diversity) || !std::isfinite(p.location))
    fail(ErrorKind::Parameter, "Laplace diversity must be positive and finite, got " + std::to_string(p.diversity));
  if (!(step > 0.0) || !std::isfinite(step))
    fail(ErrorKind::Parameter, "quantizer step must be positive and finite, got " + std::to_string(step));
}
}  // namespace

double laplace_cdf(double x, const LaplaceParams& p) {
  const double z = (x - p.location) / p.diversity;
  return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

double laplace_interval_probability(double y, const LaplaceParams& p, double step) {
  const double lo = (y - 0.5 * step - p.location) / p.diversity;
  const double hi = (y + 0.5 * step - p.location) / p.diversity;
  if (lo >= 0.0) return 0.5 * (std::exp(-lo) - std::exp(-hi));
  if (hi <= 0.0) return 0.5 * (std::exp(hi) - std::exp(lo));
  return 1.0 - 0.5 * std::exp(-hi) - 0.5 * std::exp(lo);
}

double laplace_bits(double y, const LaplaceParams& p, double step) {
  check_model(p, step);
  return -std::log2(std::max(laplace_interval_probability(y, p, step), kMinProbability));
}

LaplaceBitsGradient laplace_bits_gradient(double y, const LaplaceParams& p, double step) {
  check_model(p, step);
  LaplaceBitsGradient out;
  const double prob = laplace_interval_probability(y, p, step);
  if (prob <= kMinProbability) return out;
  const double b = p.diversity;
  const double hi = y + 0.5 * step, lo = y - 0.5 * step;
  auto pdf = [&](double x) { return std::exp(-std::abs(x - p.location) / b) / (2.0 * b); };
  const double ph = pdf(hi), pl = pdf(lo);
  // dCDF/dx = pdf, dCDF/dm = -pdf, dCDF/db = -(x - m)/b * pdf
  const double dprob_dy = ph - pl;
  const double dprob_dm = -ph + pl;
  const double dprob_db = -(hi - p.location) / b * ph + (lo - p.location) / b * pl;
  const double dprob_dstep = 0.5 * (ph + pl);
  const double scale = -1.0 / (prob * std::numbers::ln2);
  out.d_y = scale * dprob_dy;
  out.d_location = scale * dprob_dm;
  out.d_diversity = scale * dprob_db;
  out.d_step = scale * dprob_dstep;
  return out;
}

double group_bits(std::span<const double> coefficients, const LaplaceParams& p, double step) {
  double bits = 0.0;
  for (double y : coefficients) bits += laplace_bits(y, p, step);
  return bits;
}

LaplaceParams fit_laplace(std::span<const double> coefficients) {
  LaplaceParams p;
  if (coefficients.empty()) return p;
  std::vector<double> v(coefficients.begin(), coefficients.end());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  p.location = *mid;
  double mad = 0.0;
  for (double y : coefficients) mad += std::abs(y - p.location);
  p.diversity = std::max(mad / static_cast<double>(coefficients.size()), 1e-3);
  return p;
}

}  // namespace rahtpc
