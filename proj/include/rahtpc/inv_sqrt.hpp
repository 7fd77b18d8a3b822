#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rahtpc {

// Per-block matrices never exceed 8x8 (eight children per block).
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 8, 8>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 8, 1>;

enum class InvSqrtMode { Exact, Taylor };

// Series coefficients of (1 - t)^(-1/2): c_p = C(2p, p) / 4^p, p = 0..order.
std::vector<double> taylor_inv_sqrt_coefficients(int order);

// Conditioning error unless M is symmetric with
// lambda_min > 1e-12 * lambda_max.
void check_spd(const SmallMatrix& m, const std::string& context);

// Symmetric inverse square root from the eigendecomposition.
SmallMatrix inv_sqrt_exact(const SmallMatrix& m);

// Gershgorin-scaled polynomial: M^(-1/2) ~ sqrt(s) * sum_p c_p (I - sM)^p with
// s = 2 / (lo + hi), lo/hi the Gershgorin bounds (lo clipped at zero).
SmallMatrix inv_sqrt_taylor(const SmallMatrix& m, std::span<const double> coefficients);

struct InvSqrtConfig {
  InvSqrtMode mode = InvSqrtMode::Exact;
  std::span<const double> coefficients;  // Taylor mode only
};

// Validates SPD-ness, then dispatches on the mode.
SmallMatrix inv_sqrt_spd(const SmallMatrix& m, const InvSqrtConfig& config,
                         const std::string& context = "matrix");

// Reverse-mode adjoints: given dL/dR for R = M^(-1/2), return dL/dM.
SmallMatrix inv_sqrt_exact_backward(const SmallMatrix& m, const SmallMatrix& r_bar);
// Also accumulates dL/dc into coefficient_bar.
SmallMatrix inv_sqrt_taylor_backward(const SmallMatrix& m, std::span<const double> coefficients,
                                     const SmallMatrix& r_bar, std::span<double> coefficient_bar);

}  // namespace rahtpc
