#include <cmath>

#include "rahtpc/error.hpp"
#include "rahtpc/quantizer.hpp"
#include "rahtpc/rate_model.hpp"
#include "trainer_internal.hpp"

namespace rahtpc::detail {

namespace {

SmallVector slice(std::span<const double> v, std::size_t offset, int n) {
  SmallVector out(n);
  for (int k = 0; k < n; ++k) out(k) = v[offset + static_cast<std::size_t>(k)];
  return out;
}

struct BlockAdjoint {
  SmallMatrix z, r_enc, r_dec;
};

SmallMatrix isqrt_backward(const SmallMatrix& m, InvSqrtMode mode, std::span<const double> coefficients,
                           const SmallMatrix& r_bar, std::span<double> coefficient_bar) {
  if (mode == InvSqrtMode::Exact) return inv_sqrt_exact_backward(m, r_bar);
  return inv_sqrt_taylor_backward(m, coefficients, r_bar, coefficient_bar);
}

// Adjoint of one channel through the constrained-prediction stage of one
// level. Fills u_bar (upsampled field) and pred_bar (predictor output) from
// fhat_bar (reconstruction at level l+1).
struct LevelAdjointInputs {
  const TransformGeometry& geo;
  const LevelTape& tape;
  const std::vector<double>& lowpass_next;  // F*_{l+1}
  int level;
  double step;
  double step_scale;
  const LaplaceParams& rate;
  QuantMode quant;
  double d_bits;
};

struct LevelAdjointOutputs {
  std::vector<double> u_bar, pred_bar, lowpass_next_bar;
  double step_bar = 0.0, location_bar = 0.0, diversity_bar = 0.0;
};

LevelAdjointOutputs level_adjoint(const LevelAdjointInputs& in, const std::vector<double>& fhat_bar,
                                  std::vector<double>& g_bar_next, std::vector<BlockAdjoint>& blocks) {
  const auto& lb = in.geo.level(in.level);
  const auto& t = in.tape;
  LevelAdjointOutputs out;
  out.u_bar = fhat_bar;
  out.pred_bar.assign(fhat_bar.size(), 0.0);
  out.lowpass_next_bar.assign(fhat_bar.size(), 0.0);
  for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
    const auto& b = lb.blocks[bi];
    auto& adj = blocks[bi];
    const auto off = lb.high_offset[bi];
    const int m = b.size, k = b.kept();
    const std::size_t fc = b.first_child;

    const SmallVector fb = slice(fhat_bar, fc, m);
    const SmallVector ghat = slice(t.highpass, off, k);
    adj.z += fb * ghat.transpose();
    const SmallVector ghat_bar = b.zmat.transpose() * fb;

    // G^ = R_dec s with s = dequantized + R_dec b'
    const SmallVector s = slice(t.dequantized, off, k) + slice(t.predicted, off, k);
    adj.r_dec += ghat_bar * s.transpose();
    const SmallVector s_bar = b.isqrt_decoder.transpose() * ghat_bar;
    const SmallVector bp = slice(t.b_prime, off, k);
    adj.r_dec += s_bar * bp.transpose();
    SmallVector bp_bar = b.isqrt_decoder.transpose() * s_bar;

    // Straight-through quantizer, then the rate proxy on the unquantized value.
    SmallVector coded_bar = s_bar;
    for (int c = 0; c < k; ++c) {
      const double y = t.coded[off + static_cast<std::size_t>(c)];
      if (in.quant == QuantMode::Round)
        out.step_bar += in.step_scale * s_bar(c) * static_cast<double>(quantize(y, in.step));
      const auto gr = laplace_bits_gradient(y, in.rate, in.step);
      coded_bar(c) += in.d_bits * gr.d_y;
      out.location_bar += in.d_bits * gr.d_location;
      out.diversity_bar += in.d_bits * gr.d_diversity;
      out.step_bar += in.d_bits * gr.d_step * in.step_scale;
    }

    // coded = R_enc (b* - b')
    const SmallVector v = slice(t.b_star, off, k) - bp;
    adj.r_enc += coded_bar * v.transpose();
    const SmallVector v_bar = b.isqrt_encoder.transpose() * coded_bar;
    bp_bar -= v_bar;

    // b* = Z^T diag(g) F*_{l+1}
    const SmallVector xs = slice(in.lowpass_next, fc, m);
    adj.z += b.g.cwiseProduct(xs) * v_bar.transpose();
    const SmallVector zs = b.zmat * v_bar;
    // b' = Z^T diag(g) (F-dagger - U)
    SmallVector delta(m);
    for (int j = 0; j < m; ++j) delta(j) = t.prediction[fc + j] - t.upsampled[fc + j];
    adj.z += b.g.cwiseProduct(delta) * bp_bar.transpose();
    const SmallVector zp = b.zmat * bp_bar;
    for (int j = 0; j < m; ++j) {
      const auto node = fc + static_cast<std::size_t>(j);
      g_bar_next[node] += xs(j) * zs(j) + delta(j) * zp(j);
      out.lowpass_next_bar[node] += b.g(j) * zs(j);
      const double d_bar = b.g(j) * zp(j);
      out.pred_bar[node] += d_bar;
      out.u_bar[node] -= d_bar;
    }
  }
  return out;
}

void linear_adjoint(const LevelTape& t, const Neighborhood& nb, const LinearPredictorParams& p,
                    const std::vector<double>& pred_bar, std::vector<double>& u_bar, Weights27& w_bar) {
  for (std::size_t i = 0; i < nb.size(); ++i) {
    double den = 0.0;
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) den += p.w[nb.tap[e]];
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
      u_bar[nb.index[e]] += p.w[nb.tap[e]] / den * pred_bar[i];
      w_bar[nb.tap[e]] += pred_bar[i] * (t.upsampled[nb.index[e]] - t.prediction[i]) / den;
    }
  }
}

// Cascade adjoint with frozen weights; accumulates dJ/dW into weight_bar.
void pbf_adjoint(const LevelTape& t, const Neighborhood& nb, const PbfParams& p, std::span<const double> weights,
                 const std::vector<double>& pred_bar, std::vector<double>& u_bar, std::vector<double>& r_bar,
                 std::vector<double>& weight_bar) {
  const std::size_t n = nb.size();
  const std::size_t order = p.r.size() - 1;
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) degree[i] += weights[e];

  std::vector<std::vector<double>> x(order + 1), y(order + 1);
  x[0] = t.upsampled;
  for (std::size_t k = 1; k <= order; ++k) {
    y[k].resize(n);
    x[k].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) s += weights[e] * x[k - 1][nb.index[e]];
      y[k][i] = s / degree[i];
      x[k][i] = (1.0 - p.r[k]) * x[k - 1][i] + p.r[k] * y[k][i];
    }
  }

  std::vector<double> x_bar(n), prev(n);
  for (std::size_t i = 0; i < n; ++i) {
    r_bar[0] += pred_bar[i] * x[order][i];
    x_bar[i] = p.r[0] * pred_bar[i];
  }
  for (std::size_t k = order; k >= 1; --k) {
    const double rk = p.r[k];
    for (std::size_t i = 0; i < n; ++i) {
      r_bar[k] += x_bar[i] * (y[k][i] - x[k - 1][i]);
      prev[i] = (1.0 - rk) * x_bar[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double yb = rk * x_bar[i];
      for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
        prev[nb.index[e]] += weights[e] / degree[i] * yb;
        weight_bar[e] += yb * (x[k - 1][nb.index[e]] - y[k][i]) / degree[i];
      }
    }
    x_bar.swap(prev);
  }
  for (std::size_t i = 0; i < n; ++i) u_bar[i] += x_bar[i];
}

}  // namespace

void backward_sample(const TrainingSample& sample, const ModelParams& params, const SampleForward& fwd,
                     QuantMode quant, double d_se, double d_bits, ModelParams& grad) {
  const auto& cg = sample.geometry;
  const auto& h = cg.hierarchy;
  const auto& geo = fwd.geo;
  const auto& tape = fwd.enc.tape;
  const int depth = h.depth, l0 = h.root_level;
  const auto levels = static_cast<std::size_t>(h.num_transform_levels());
  const std::size_t channels = sample.cloud.channels;
  auto slot_of = [depth](int l) { return static_cast<std::size_t>(depth - 1 - l); };

  std::vector<std::vector<double>> g_bar(static_cast<std::size_t>(depth) + 1);
  for (int l = l0; l <= depth; ++l) g_bar[static_cast<std::size_t>(l)].assign(h.count(l), 0.0);
  std::vector<AKernel> wa_bar(levels, AKernel{}), ws_bar(levels, AKernel{});
  std::vector<std::vector<BlockAdjoint>> block_bar(levels);
  for (std::size_t idx = 0; idx < levels; ++idx)
    for (const auto& b : geo.levels[idx].blocks)
      block_bar[idx].push_back({SmallMatrix::Zero(b.size, b.kept()), SmallMatrix::Zero(b.kept(), b.kept()),
                                SmallMatrix::Zero(b.kept(), b.kept())});
  std::vector<std::vector<double>> pbf_weight_bar(levels);
  if (params.predictor == PredictorKind::Pbf)
    for (std::size_t idx = 0; idx < levels; ++idx) pbf_weight_bar[idx].assign(tape.pbf_weights[idx].size(), 0.0);
  std::vector<double> root_enc_bar(h.count(l0), 0.0), root_dec_bar(h.count(l0), 0.0);
  double step_bar = 0.0;

  // [channel][level] adjoints of the unnormalized and normalized low-pass.
  std::vector<std::vector<std::vector<double>>> ft_bar(channels), fs_bar(channels);

  for (std::size_t c = 0; c < channels; ++c) {
    ft_bar[c].resize(static_cast<std::size_t>(depth) + 1);
    fs_bar[c].resize(static_cast<std::size_t>(depth) + 1);
    const double step = params.quantizer.step_for(c);
    const double step_scale = step / params.quantizer.step;

    std::vector<double> fhat_bar(h.num_points());
    for (std::size_t k = 0; k < h.num_points(); ++k) {
      const auto i = h.leaf_point[k];
      fhat_bar[k] = d_se * 2.0 * (fwd.enc.reconstruction[i * channels + c] - sample.cloud.attribute(i, c));
    }

    for (int l = depth - 1; l >= l0; --l) {
      const auto idx = static_cast<std::size_t>(l - l0);
      const auto slot = slot_of(l);
      const auto& t = tape.levels[c][idx];
      const auto& fhat_l = idx == 0 ? tape.root_reconstructed[c] : tape.levels[c][idx - 1].reconstructed;
      const auto& lowpass_next = tape.lowpass[c].normalized[static_cast<std::size_t>(l) + 1];
      auto& rate_bar = grad.rate_model.levels[slot];
      const LevelAdjointInputs in{geo, t, lowpass_next, l, step, step_scale, params.rate_for(depth, l), quant, d_bits};
      auto adj = level_adjoint(in, fhat_bar, g_bar[static_cast<std::size_t>(l) + 1], block_bar[idx]);
      step_bar += adj.step_bar;
      rate_bar.location += adj.location_bar;
      rate_bar.diversity += adj.diversity_bar;
      if (l + 1 < depth) fs_bar[c][static_cast<std::size_t>(l) + 1] = std::move(adj.lowpass_next_bar);

      std::vector<double> fhat_l_bar(h.count(l), 0.0);
      const auto& lp = params.level(depth, l);
      auto& lp_bar = grad.levels[slot];
      switch (params.predictor) {
        case PredictorKind::None:
          for (std::size_t j = 0; j < adj.u_bar.size(); ++j) adj.u_bar[j] += adj.pred_bar[j];
          break;
        case PredictorKind::Linear:
          linear_adjoint(t, cg.neighborhoods[idx], lp.linear, adj.pred_bar, adj.u_bar, lp_bar.linear.w);
          break;
        case PredictorKind::Gpcc: {
          const auto& st = cg.gpcc[idx];
          for (std::size_t j = 0; j + 1 < st.begin.size(); ++j)
            for (auto e = st.begin[j]; e < st.begin[j + 1]; ++e) fhat_l_bar[st.parent[e]] += st.weight[e] * adj.pred_bar[j];
          break;
        }
        case PredictorKind::Pbf:
          pbf_adjoint(t, cg.neighborhoods[idx], lp.pbf, tape.pbf_weights[idx], adj.pred_bar, adj.u_bar, lp_bar.pbf.r,
                      pbf_weight_bar[idx]);
          break;
      }

      // U = A_s^T F^_l
      const auto& ws = geo.synthesis_kernel(l);
      const auto& up = h.parent[static_cast<std::size_t>(l) + 1];
      for (std::size_t j = 0; j < adj.u_bar.size(); ++j) {
        const auto d = static_cast<std::size_t>(h.offset_of(l + 1, j));
        fhat_l_bar[up[j]] += ws[d] * adj.u_bar[j];
        ws_bar[idx][d] += fhat_l[up[j]] * adj.u_bar[j];
      }
      fhat_bar = std::move(fhat_l_bar);
    }

    // Root: F^_{l0} = r_dec Q(r_enc F~_{l0})
    const auto& ft = tape.lowpass[c].unnormalized[static_cast<std::size_t>(l0)];
    const auto& coded = tape.root_coded[c];
    const auto& deq = tape.root_dequantized[c];
    auto& root_ft_bar = ft_bar[c][static_cast<std::size_t>(l0)];
    root_ft_bar.assign(ft.size(), 0.0);
    for (std::size_t i = 0; i < ft.size(); ++i) {
      root_dec_bar[i] += fhat_bar[i] * deq[i];
      double coded_bar = geo.root_isqrt_decoder[i] * fhat_bar[i];
      if (quant == QuantMode::Round)
        step_bar += step_scale * coded_bar * static_cast<double>(quantize(coded[i], step));
      const auto gr = laplace_bits_gradient(coded[i], params.rate_model.root, step);
      coded_bar += d_bits * gr.d_y;
      grad.rate_model.root.location += d_bits * gr.d_location;
      grad.rate_model.root.diversity += d_bits * gr.d_diversity;
      step_bar += d_bits * gr.d_step * step_scale;
      root_enc_bar[i] += coded_bar * ft[i];
      root_ft_bar[i] += geo.root_isqrt_encoder[i] * coded_bar;
    }
  }

  // Low-pass recursion, coarse to fine: F*_l = F~_l / g_l, F~_l = A_l F~_{l+1}.
  for (std::size_t c = 0; c < channels; ++c) {
    const auto& lpyr = tape.lowpass[c];
    for (int l = l0; l < depth; ++l) {
      const auto li = static_cast<std::size_t>(l);
      const auto idx = static_cast<std::size_t>(l - l0);
      auto& fb = ft_bar[c][li];
      fb.resize(h.count(l), 0.0);
      const auto& gl = geo.gram.at(l);
      if (!fs_bar[c][li].empty())
        for (std::size_t i = 0; i < fb.size(); ++i) {
          fb[i] += fs_bar[c][li][i] / gl[i];
          g_bar[li][i] -= fs_bar[c][li][i] * lpyr.unnormalized[li][i] / (gl[i] * gl[i]);
        }
      auto& next = ft_bar[c][li + 1];
      next.resize(h.count(l + 1), 0.0);
      const auto& wa = geo.analysis_kernel(l);
      for (std::size_t i = 0; i < fb.size(); ++i)
        for (auto j = h.first_child(l, i); j < h.end_child(l, i); ++j) {
          const auto d = static_cast<std::size_t>(h.offset_of(l + 1, j));
          next[j] += wa[d] * fb[i];
          wa_bar[idx][d] += lpyr.unnormalized[li + 1][j] * fb[i];
        }
    }
  }

  // Root inverse square roots of g_{l0}.
  {
    const auto slot = slot_of(l0);
    const auto& lp = params.level(depth, l0);
    auto& lp_bar = grad.levels[slot];
    const auto& g0 = geo.gram.at(l0);
    for (std::size_t i = 0; i < g0.size(); ++i) {
      SmallMatrix m(1, 1), rb(1, 1);
      m(0, 0) = g0[i];
      rb(0, 0) = root_enc_bar[i];
      g_bar[static_cast<std::size_t>(l0)][i] +=
          isqrt_backward(m, params.inv_sqrt, lp.taylor_encoder, rb, lp_bar.taylor_encoder)(0, 0);
      rb(0, 0) = root_dec_bar[i];
      g_bar[static_cast<std::size_t>(l0)][i] +=
          isqrt_backward(m, params.inv_sqrt, lp.taylor_decoder, rb, lp_bar.taylor_decoder)(0, 0);
    }
  }

  // Block bases: psi = Z^T diag(g) Z, Z = I^b - a u^T / G.
  for (int l = l0; l < depth; ++l) {
    const auto idx = static_cast<std::size_t>(l - l0);
    const auto slot = slot_of(l);
    const auto& lp = params.level(depth, l);
    auto& lp_bar = grad.levels[slot];
    auto& gn = g_bar[static_cast<std::size_t>(l) + 1];
    const auto& lb = geo.levels[idx];
    for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
      const auto& b = lb.blocks[bi];
      auto& adj = block_bar[idx][bi];
      const int m = b.size;
      SmallMatrix psi_bar = isqrt_backward(b.psi_gram, params.inv_sqrt, lp.taylor_encoder, adj.r_enc, lp_bar.taylor_encoder);
      psi_bar += isqrt_backward(b.psi_gram, params.inv_sqrt, lp.taylor_decoder, adj.r_dec, lp_bar.taylor_decoder);
      const SmallMatrix psi_sym = psi_bar + psi_bar.transpose();
      SmallMatrix z_bar = adj.z + b.g.asDiagonal() * b.zmat * psi_sym;
      SmallVector a_bar = SmallVector::Zero(m), gb = SmallVector::Zero(m);
      const SmallMatrix zpz = b.zmat * psi_bar * b.zmat.transpose();
      for (int j = 0; j < m; ++j) gb(j) += zpz(j, j);

      // Z(k, c) = [k == c+1] - a_k a_{c+1} g_{c+1} / G
      const double G = b.g_parent;
      double G_bar = 0.0;
      for (int c = 0; c + 1 < m; ++c) {
        const int q = c + 1;
        for (int k = 0; k < m; ++k) {
          const double t_bar = -z_bar(k, c);
          const double tv = b.a(k) * b.a(q) * b.g(q) / G;
          a_bar(k) += t_bar * b.a(q) * b.g(q) / G;
          a_bar(q) += t_bar * b.a(k) * b.g(q) / G;
          gb(q) += t_bar * b.a(k) * b.a(q) / G;
          G_bar -= t_bar * tv / G;
        }
      }
      for (int k = 0; k < m; ++k) {
        a_bar(k) += 2.0 * b.a(k) * b.g(k) * G_bar;
        gb(k) += b.a(k) * b.a(k) * G_bar;
      }
      for (int k = 0; k < m; ++k) {
        const auto node = b.first_child + static_cast<std::size_t>(k);
        gn[node] += gb(k);
        wa_bar[idx][static_cast<std::size_t>(h.offset_of(l + 1, node))] += a_bar(k);
      }
    }
  }

  // Gram recursion, coarse to fine: g_l = sum_d w_d^2 g_{l+1}.
  for (int l = l0; l < depth; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto idx = static_cast<std::size_t>(l - l0);
    const auto& wa = geo.analysis_kernel(l);
    const auto& g_next = geo.gram.at(l + 1);
    for (std::size_t i = 0; i < h.count(l); ++i)
      for (auto j = h.first_child(l, i); j < h.end_child(l, i); ++j) {
        const auto d = static_cast<std::size_t>(h.offset_of(l + 1, j));
        g_bar[li + 1][j] += wa[d] * wa[d] * g_bar[li][i];
        wa_bar[idx][d] += 2.0 * wa[d] * g_next[j] * g_bar[li][i];
      }
  }

  // Bilateral weights: W = exp(-|k|^2 / 2 sx^2) exp(-dx^2 / 2 sy^2) with the guide frozen.
  if (params.predictor == PredictorKind::Pbf) {
    for (std::size_t idx = 0; idx < levels; ++idx) {
      const int l = l0 + static_cast<int>(idx);
      const auto& pbf = params.level(depth, l).pbf;
      auto& pb = grad.levels[slot_of(l)].pbf;
      const auto& nb = cg.neighborhoods[idx];
      const auto& w = tape.pbf_weights[idx];
      const auto& guide = tape.guides[idx];
      const double sx3 = pbf.sigma_x * pbf.sigma_x * pbf.sigma_x;
      const double sy3 = pbf.sigma_y * pbf.sigma_y * pbf.sigma_y;
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
          const Coord3 k = tap_offset(nb.tap[e]);
          const double s = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
          const double dx = guide[i] - guide[nb.index[e]];
          pb.sigma_x += pbf_weight_bar[idx][e] * w[e] * s / sx3;
          pb.sigma_y += pbf_weight_bar[idx][e] * w[e] * dx * dx / sy3;
        }
    }
  }

  for (std::size_t idx = 0; idx < levels; ++idx) {
    auto& lp_bar = grad.levels[slot_of(l0 + static_cast<int>(idx))];
    for (std::size_t d = 0; d < 8; ++d) {
      lp_bar.analysis_kernel[d] += wa_bar[idx][d];
      if (params.tied_kernels) lp_bar.analysis_kernel[d] += ws_bar[idx][d];
      else lp_bar.synthesis_kernel[d] += ws_bar[idx][d];
    }
  }
  grad.quantizer.step += step_bar;
}

}  // namespace rahtpc::detail
