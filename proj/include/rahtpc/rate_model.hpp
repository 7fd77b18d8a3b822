#pragma once

#include <span>
#include <vector>

namespace rahtpc {

struct LaplaceParams {
  double location = 0.0;
  double diversity = 16.0;
};

// One (location, diversity) pair for the root low-pass group and one per
// transform level, indexed like ModelParams::levels (0 = finest).
struct LaplaceRateModel {
  LaplaceParams root;
  std::vector<LaplaceParams> levels;
};

inline constexpr double kMinProbability = 0x1p-40;

double laplace_cdf(double x, const LaplaceParams& p);

// CDF(y + step/2) - CDF(y - step/2), evaluated on the tail that keeps
// precision. Not clamped.
double laplace_interval_probability(double y, const LaplaceParams& p, double step);

// -log2 of the clamped interval probability.
double laplace_bits(double y, const LaplaceParams& p, double step);

// Partial derivatives of laplace_bits; zero where the clamp is active.
struct LaplaceBitsGradient {
  double d_y = 0.0, d_location = 0.0, d_diversity = 0.0, d_step = 0.0;
};
LaplaceBitsGradient laplace_bits_gradient(double y, const LaplaceParams& p, double step);

// Sum of laplace_bits over a coefficient group.
double group_bits(std::span<const double> coefficients, const LaplaceParams& p, double step);

// Median location and mean absolute deviation diversity (ML fit).
LaplaceParams fit_laplace(std::span<const double> coefficients);

}  // namespace rahtpc
