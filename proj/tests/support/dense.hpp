#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rahtpc/hierarchy.hpp"
#include "rahtpc/predictor.hpp"

namespace rahtpc::testing {

// Explicitly assembled basis matrices of the B-spline transform over one
// hierarchy. Vectors are indexed by absolute level; rows are leaves in Morton
// order.
struct DenseTransform {
  int root_level = 0, depth = 0;
  std::vector<Eigen::MatrixXd> phi;  // N_L x N_l, levels root_level..depth
  std::vector<Eigen::MatrixXd> a;    // N_l x N_{l+1}, levels root_level..depth-1
  std::vector<Eigen::MatrixXd> z;    // N_{l+1} x (N_{l+1} - N_l)
  std::vector<Eigen::MatrixXd> psi;  // N_L x (N_{l+1} - N_l)
};

DenseTransform dense_transform(const LevelHierarchy& h, std::span<const AKernel> kernels);

// Symmetric matrix power through the eigendecomposition.
Eigen::MatrixXd sym_pow(const Eigen::MatrixXd& m, double p);

// Least-squares coefficients (B^T B)^-1 B^T y.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y);

// Orthonormal pipeline coefficients of one channel: root first, then every
// level from coarse to fine. `predictor(l, U)` returns the prediction at
// level l+1 from the upsampled field U; leave it empty for none.
using DensePredictor = std::function<Eigen::VectorXd(int level, const Eigen::VectorXd& upsampled)>;
std::vector<double> dense_coefficients(const DenseTransform& d, const Eigen::VectorXd& leaf_values,
                                       const DensePredictor& predictor = {});

// D^-1 W U over the occupied 27-neighbourhood, found by scanning every node.
Eigen::VectorXd brute_force_linear(const LevelHierarchy& h, int level, const Eigen::VectorXd& u,
                                   const Weights27& w);

// Inverse-distance G-PCC prediction of level+1 from the level values f,
// scanning every parent for each child.
Eigen::VectorXd brute_force_gpcc(const LevelHierarchy& h, int level, const Eigen::VectorXd& f);

// r_0 prod_k ((1 - r_k) I + r_k D^-1 W) u with the dense bilateral matrix W
// of the level's nodes, guided by `guide`.
Eigen::VectorXd brute_force_pbf(const LevelHierarchy& h, int level, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& guide, const PbfParams& p);

}  // namespace rahtpc::testing
