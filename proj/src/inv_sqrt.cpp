#include "rahtpc/inv_sqrt.hpp"

#include <algorithm>
#include <cmath>

#include "rahtpc/error.hpp"

namespace rahtpc {

std::vector<double> taylor_inv_sqrt_coefficients(int order) {
  if (order < 0) fail(ErrorKind::Parameter, "Taylor order must be non-negative");
  std::vector<double> c(static_cast<std::size_t>(order) + 1);
  c[0] = 1.0;
  for (int p = 1; p <= order; ++p)
    c[static_cast<std::size_t>(p)] =
        c[static_cast<std::size_t>(p) - 1] * (2.0 * p - 1.0) / (2.0 * p);
  return c;
}

void check_spd(const SmallMatrix& m, const std::string& context) {
  if (m.rows() != m.cols() || m.rows() == 0)
    fail(ErrorKind::Shape, context + ": expected a non-empty square matrix");
  if (!m.allFinite()) fail(ErrorKind::Conditioning, context + ": non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  if (!((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1e-300)))
    fail(ErrorKind::Conditioning, context + ": matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double hi = ev.maxCoeff();
  const double lo = ev.minCoeff();
  if (!(hi > 0.0) || !(lo > 1e-12 * hi))
    fail(ErrorKind::Conditioning, context + ": not positive definite (eigenvalues " +
                                      std::to_string(lo) + " .. " + std::to_string(hi) + ")");
}

SmallMatrix inv_sqrt_exact(const SmallMatrix& m) {
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(m);
  const SmallVector d = es.eigenvalues().array().rsqrt().matrix();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

struct Gershgorin {
  double lo = 0.0, hi = 0.0;
  int lo_row = -1;  // -1 when lo was clipped at zero
  int hi_row = 0;
};

Gershgorin gershgorin(const SmallMatrix& m) {
  Gershgorin g;
  const auto n = static_cast<int>(m.rows());
  double lo = 0.0;
  for (int i = 0; i < n; ++i) {
    double radius = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) radius += std::abs(m(i, j));
    const double upper = m(i, i) + radius;
    const double lower = m(i, i) - radius;
    if (i == 0 || upper > g.hi) {
      g.hi = upper;
      g.hi_row = i;
    }
    if (i == 0 || lower < lo) {
      lo = lower;
      g.lo_row = i;
    }
  }
  if (lo > 0.0) {
    g.lo = lo;
  } else {
    g.lo = 0.0;
    g.lo_row = -1;
  }
  return g;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

SmallMatrix inv_sqrt_taylor(const SmallMatrix& m, std::span<const double> c) {
  if (c.empty()) fail(ErrorKind::Parameter, "Taylor mode needs at least one coefficient");
  const auto n = m.rows();
  const Gershgorin gb = gershgorin(m);
  const double s = 2.0 / (gb.lo + gb.hi);
  const SmallMatrix x = SmallMatrix::Identity(n, n) - s * m;
  SmallMatrix h = c.back() * SmallMatrix::Identity(n, n);
  for (std::size_t p = c.size() - 1; p-- > 0;) {
    SmallMatrix next = x * h;
    next.diagonal().array() += c[p];
    h = next;
  }
  return std::sqrt(s) * h;
}

SmallMatrix inv_sqrt_spd(const SmallMatrix& m, const InvSqrtConfig& config,
                         const std::string& context) {
  check_spd(m, context);
  if (config.mode == InvSqrtMode::Exact) return inv_sqrt_exact(m);
  return inv_sqrt_taylor(m, config.coefficients);
}

SmallMatrix inv_sqrt_exact_backward(const SmallMatrix& m, const SmallMatrix& r_bar) {
  // Daleckii-Krein: divided differences of f(x) = x^(-1/2) have the closed
  // form -1 / (sqrt(a) sqrt(b) (sqrt(a) + sqrt(b))), valid for a == b too.
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(m);
  const SmallMatrix& q = es.eigenvectors();
  const SmallVector root = es.eigenvalues().array().sqrt().matrix();
  const auto n = m.rows();
  SmallMatrix inner = q.transpose() * r_bar * q;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      inner(i, j) *= -1.0 / (root(i) * root(j) * (root(i) + root(j)));
  return q * inner * q.transpose();
}

SmallMatrix inv_sqrt_taylor_backward(const SmallMatrix& m, std::span<const double> c,
                                     const SmallMatrix& r_bar, std::span<double> c_bar) {
  const auto n = m.rows();
  const std::size_t order = c.size() - 1;
  const Gershgorin gb = gershgorin(m);
  const double s = 2.0 / (gb.lo + gb.hi);
  const double root_s = std::sqrt(s);
  const SmallMatrix x = SmallMatrix::Identity(n, n) - s * m;

  // Horner stages: h[order] = c_P I, h[p] = c_p I + X h[p+1].
  std::vector<SmallMatrix> h(order + 1);
  h[order] = c[order] * SmallMatrix::Identity(n, n);
  for (std::size_t p = order; p-- > 0;) {
    h[p] = x * h[p + 1];
    h[p].diagonal().array() += c[p];
  }

  double s_bar = (r_bar.cwiseProduct(h[0])).sum() / (2.0 * root_s);
  SmallMatrix h_bar = root_s * r_bar;
  SmallMatrix x_bar = SmallMatrix::Zero(n, n);
  for (std::size_t p = 0; p < order; ++p) {
    c_bar[p] += h_bar.trace();
    x_bar += h_bar * h[p + 1].transpose();
    h_bar = x.transpose() * h_bar;
  }
  c_bar[order] += h_bar.trace();

  SmallMatrix m_bar = -s * x_bar;
  s_bar -= x_bar.cwiseProduct(m).sum();

  // s = 2 / (lo + hi)
  const double bound_bar = -0.5 * s * s * s_bar;
  auto add_row = [&](int row, double weight, double off_sign) {
    m_bar(row, row) += weight;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != row) m_bar(row, j) += weight * off_sign * sign(m(row, j));
  };
  add_row(gb.hi_row, bound_bar, 1.0);
  if (gb.lo_row >= 0) add_row(gb.lo_row, bound_bar, -1.0);
  return m_bar;
}

}  // namespace rahtpc
