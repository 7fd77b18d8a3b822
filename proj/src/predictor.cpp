#include "rahtpc/predictor.hpp"

#include <cmath>
#include <cstdlib>

#include "rahtpc/error.hpp"

namespace rahtpc {

const char* to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::None: return "none";
    case PredictorKind::Linear: return "linear";
    case PredictorKind::Gpcc: return "gpcc";
    case PredictorKind::Pbf: return "pbf";
  }
  return "unknown";
}

PredictorKind parse_predictor(const std::string& name) {
  if (name == "none") return PredictorKind::None;
  if (name == "linear") return PredictorKind::Linear;
  if (name == "gpcc") return PredictorKind::Gpcc;
  if (name == "pbf") return PredictorKind::Pbf;
  fail(ErrorKind::Usage, "unknown predictor '" + name + "' (expected none|linear|gpcc|pbf)");
}

LinearPredictorParams LinearPredictorParams::defaults() {
  LinearPredictorParams p;
  for (int t = 0; t < 27; ++t) {
    const auto k = tap_offset(t);
    p.w[static_cast<std::size_t>(t)] = std::ldexp(1.0, -(std::abs(k[0]) + std::abs(k[1]) + std::abs(k[2])));
  }
  return p;
}

PbfParams PbfParams::defaults(int order) {
  PbfParams p;
  p.r.assign(static_cast<std::size_t>(order) + 1, order > 0 ? 1.0 / order : 0.0);
  p.r[0] = 1.0;
  return p;
}

void validate(const PbfParams& p) {
  if (!(p.sigma_x > 0.0) || !(p.sigma_y > 0.0))
    fail(ErrorKind::Parameter, "PBF sigmas must be positive");
  if (p.r.empty()) fail(ErrorKind::Parameter, "PBF needs at least the gain coefficient r_0");
}

Neighborhood build_neighborhood(const LevelHierarchy& h, int level) {
  Neighborhood nb;
  const auto& codes = h.nodes[static_cast<std::size_t>(level)];
  nb.begin.reserve(codes.size() + 1);
  nb.begin.push_back(0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const Coord3 p = morton_decode(codes[i]);
    for (int t = 0; t < 27; ++t) {
      const Coord3 k = tap_offset(t);
      const auto j = h.find(level, {p[0] + k[0], p[1] + k[1], p[2] + k[2]});
      if (j < 0) continue;
      nb.index.push_back(static_cast<std::uint32_t>(j));
      nb.tap.push_back(static_cast<std::uint8_t>(t));
    }
    nb.begin.push_back(static_cast<std::uint32_t>(nb.index.size()));
  }
  return nb;
}

std::vector<double> upsample(const LevelHierarchy& h, const AKernel& kernel, int level,
                             std::span<const double> lowpass) {
  if (lowpass.size() != h.count(level))
    fail(ErrorKind::Shape, "upsample input length does not match level " + std::to_string(level));
  std::vector<double> out(h.count(level + 1));
  const auto& up = h.parent[static_cast<std::size_t>(level) + 1];
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = kernel[static_cast<std::size_t>(h.offset_of(level + 1, j))] * lowpass[up[j]];
  return out;
}

std::vector<double> predict_linear(std::span<const double> upsampled, const LinearPredictorParams& params,
                                   const Neighborhood& nb) {
  if (upsampled.size() != nb.size()) fail(ErrorKind::Shape, "linear predictor input length mismatch");
  std::vector<double> out(upsampled.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double num = 0.0, den = 0.0;
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
      const double w = params.w[nb.tap[e]];
      num += w * upsampled[nb.index[e]];
      den += w;
    }
    if (std::abs(den) < 1e-12)
      fail(ErrorKind::Prediction, "linear predictor: node " + std::to_string(i) + " has zero degree");
    out[i] = num / den;
  }
  return out;
}

GpccStencil build_gpcc_stencil(const LevelHierarchy& h, int level) {
  GpccStencil st;
  const auto& children = h.nodes[static_cast<std::size_t>(level) + 1];
  const auto& up = h.parent[static_cast<std::size_t>(level) + 1];
  st.begin.reserve(children.size() + 1);
  st.begin.push_back(0);
  for (std::size_t j = 0; j < children.size(); ++j) {
    const Coord3 m = morton_decode(children[j]);
    // Per axis, m - 2n in {-1..2} admits n = floor(m/2) and its neighbour
    // on the side of m's parity.
    std::array<std::array<std::int32_t, 2>, 3> cand{};
    for (int a = 0; a < 3; ++a) {
      const std::int32_t base = m[a] >> 1;
      cand[a] = {base, (m[a] & 1) ? base + 1 : base - 1};
    }
    const auto start = st.parent.size();
    double total = 0.0;
    for (int bx = 0; bx < 2; ++bx)
      for (int by = 0; by < 2; ++by)
        for (int bz = 0; bz < 2; ++bz) {
          const Coord3 n{cand[0][bx], cand[1][by], cand[2][bz]};
          const auto i = h.find(level, n);
          if (i < 0) continue;
          double d2 = 0.0;
          for (int a = 0; a < 3; ++a) {
            const double diff = (2.0 * n[a] + 1.0) - (m[a] + 0.5);
            d2 += diff * diff;
          }
          const double w = 1.0 / std::sqrt(d2);
          st.parent.push_back(static_cast<std::uint32_t>(i));
          st.weight.push_back(w);
          total += w;
        }
    if (st.parent.size() == start) {
      ++st.fallbacks;
      st.parent.push_back(up[j]);
      st.weight.push_back(1.0);
      total = 1.0;
    }
    for (auto e = start; e < st.parent.size(); ++e) st.weight[e] /= total;
    st.begin.push_back(static_cast<std::uint32_t>(st.parent.size()));
  }
  return st;
}

std::vector<double> predict_gpcc_baseline(std::span<const double> lowpass, const GpccStencil& st) {
  std::vector<double> out(st.begin.empty() ? 0 : st.begin.size() - 1);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = 0.0;
    for (auto e = st.begin[j]; e < st.begin[j + 1]; ++e) {
      if (st.parent[e] >= lowpass.size()) fail(ErrorKind::Shape, "G-PCC stencil does not match input");
      s += st.weight[e] * lowpass[st.parent[e]];
    }
    out[j] = s;
  }
  return out;
}

std::vector<double> bilateral_weights(std::span<const double> guide, const Neighborhood& nb,
                                      double sigma_x, double sigma_y) {
  if (guide.size() != nb.size()) fail(ErrorKind::Shape, "bilateral guide length mismatch");
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) fail(ErrorKind::Parameter, "bilateral sigmas must be positive");
  const double ax = 1.0 / (2.0 * sigma_x * sigma_x);
  const double ay = 1.0 / (2.0 * sigma_y * sigma_y);
  std::vector<double> w(nb.index.size());
  for (std::size_t i = 0; i < nb.size(); ++i) {
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
      const Coord3 k = tap_offset(nb.tap[e]);
      const double s = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
      const double dx = guide[i] - guide[nb.index[e]];
      w[e] = std::exp(-s * ax) * std::exp(-dx * dx * ay);
    }
  }
  return w;
}

std::vector<double> predict_pbf(std::span<const double> upsampled, const PbfParams& params,
                                const Neighborhood& nb, std::span<const double> weights) {
  validate(params);
  if (upsampled.size() != nb.size() || weights.size() != nb.index.size())
    fail(ErrorKind::Shape, "PBF input length mismatch");
  const std::size_t n = upsampled.size();
  std::vector<double> degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) d += weights[e];
    if (!(d > 0.0)) fail(ErrorKind::Prediction, "PBF: node " + std::to_string(i) + " has zero degree");
    degree[i] = d;
  }
  std::vector<double> x(upsampled.begin(), upsampled.end()), next(n);
  for (std::size_t k = 1; k < params.r.size(); ++k) {
    const double rk = params.r[k];
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) s += weights[e] * x[nb.index[e]];
      next[i] = (1.0 - rk) * x[i] + rk * s / degree[i];
    }
    x.swap(next);
  }
  for (auto& v : x) v *= params.r[0];
  return x;
}

std::vector<double> predict_pbf(std::span<const double> upsampled, const PbfParams& params,
                                const Neighborhood& nb) {
  const auto w = bilateral_weights(upsampled, nb, params.sigma_x, params.sigma_y);
  return predict_pbf(upsampled, params, nb, w);
}

std::vector<double> constrained_projection(const TransformGeometry& geo, int level,
                                           std::span<const double> prediction,
                                           std::span<const double> upsampled, ProjectionMode mode) {
  const auto& lb = geo.level(level);
  const auto n = geo.hierarchy.count(level + 1);
  if (prediction.size() != n || (mode == ProjectionMode::FromLowpass && upsampled.size() != n))
    fail(ErrorKind::Shape, "projection input length does not match level " + std::to_string(level + 1));
  std::vector<double> out(lb.high_count);
  std::array<double, 8> x{};
  for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
    const auto& b = lb.blocks[bi];
    for (int k = 0; k < b.size; ++k) {
      const auto j = b.first_child + static_cast<std::size_t>(k);
      x[static_cast<std::size_t>(k)] =
          mode == ProjectionMode::FromLowpass ? prediction[j] - upsampled[j] : prediction[j];
    }
    const SmallVector gp = analyze_highpass(std::span(x.data(), static_cast<std::size_t>(b.size)), b);
    for (int c = 0; c < b.kept(); ++c) out[lb.high_offset[bi] + static_cast<std::size_t>(c)] = gp(c);
  }
  return out;
}

std::vector<double> residual(std::span<const double> g_star, std::span<const double> g_prime) {
  if (g_star.size() != g_prime.size()) fail(ErrorKind::Shape, "residual operands differ in length");
  std::vector<double> out(g_star.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g_star[i] - g_prime[i];
  return out;
}

}  // namespace rahtpc
