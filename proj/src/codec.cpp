#include "rahtpc/codec.hpp"

#include <string>

#include "rahtpc/error.hpp"
#include "rahtpc/quantizer.hpp"

namespace rahtpc {

std::size_t CoefficientPyramid::coefficients_per_channel() const {
  if (root.empty()) return 0;
  std::size_t n = root[0].size();
  for (const auto& level : high[0]) n += level.size();
  return n;
}

CloudGeometry prepare_geometry(const VoxelizedCloud& cloud, int root_level, PredictorKind predictor) {
  CloudGeometry cg;
  cg.hierarchy = build_hierarchy(cloud, root_level);
  cg.checksum = geometry_checksum(cloud);
  const auto& h = cg.hierarchy;
  for (int l = h.root_level; l < h.depth; ++l) {
    if (predictor == PredictorKind::Linear || predictor == PredictorKind::Pbf)
      cg.neighborhoods.push_back(build_neighborhood(h, l + 1));
    if (predictor == PredictorKind::Gpcc) cg.gpcc.push_back(build_gpcc_stencil(h, l));
  }
  return cg;
}

TransformGeometry build_transform(const CloudGeometry& cg, const ModelParams& params) {
  const int depth = cg.depth(), l0 = cg.root_level();
  return build_transform_geometry(cg.hierarchy, analysis_kernels(params, depth, l0),
                                  synthesis_kernels(params, depth, l0), inv_sqrt_networks(params, depth, l0));
}

namespace {

struct LevelPrediction {
  std::vector<std::vector<double>> upsampled;   // [channel]
  std::vector<std::vector<double>> prediction;  // [channel]
  std::vector<double> guide;
  std::vector<double> weights;
};

LevelPrediction predict_level(const CloudGeometry& cg, const TransformGeometry& geo, const ModelParams& params,
                              int level, const std::vector<std::vector<double>>& lowpass,
                              const PipelineOptions& opt) {
  const auto& h = cg.hierarchy;
  const auto idx = static_cast<std::size_t>(level - h.root_level);
  const std::size_t channels = lowpass.size();
  LevelPrediction out;
  out.upsampled.resize(channels);
  for (std::size_t c = 0; c < channels; ++c)
    out.upsampled[c] = upsample(h, geo.synthesis_kernel(level), level, lowpass[c]);

  out.prediction.resize(channels);
  if (opt.predictor_override) {
    for (std::size_t c = 0; c < channels; ++c) {
      out.prediction[c] = opt.predictor_override(level, c, out.upsampled[c]);
      if (out.prediction[c].size() != out.upsampled[c].size())
        fail(ErrorKind::Shape, "predictor override returned the wrong length");
    }
    return out;
  }
  const auto& lp = params.level(h.depth, level);
  switch (params.predictor) {
    case PredictorKind::None:
      out.prediction = out.upsampled;
      break;
    case PredictorKind::Linear:
      for (std::size_t c = 0; c < channels; ++c)
        out.prediction[c] = predict_linear(out.upsampled[c], lp.linear, cg.neighborhoods.at(idx));
      break;
    case PredictorKind::Gpcc:
      for (std::size_t c = 0; c < channels; ++c)
        out.prediction[c] = predict_gpcc_baseline(lowpass[c], cg.gpcc.at(idx));
      break;
    case PredictorKind::Pbf: {
      const auto& nb = cg.neighborhoods.at(idx);
      out.guide = opt.frozen_guides ? opt.frozen_guides->at(idx) : out.upsampled[0];
      out.weights = bilateral_weights(out.guide, nb, lp.pbf.sigma_x, lp.pbf.sigma_y);
      for (std::size_t c = 0; c < channels; ++c)
        out.prediction[c] = predict_pbf(out.upsampled[c], lp.pbf, nb, out.weights);
      break;
    }
  }
  return out;
}

// Z^T diag(g) x per block, concatenated in block order.
std::vector<double> complement(const TransformGeometry& geo, int level, std::span<const double> x) {
  const auto& lb = geo.level(level);
  std::vector<double> out(lb.high_count);
  for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
    const auto& b = lb.blocks[bi];
    const SmallVector v = project_onto_complement(b, x.subspan(b.first_child, static_cast<std::size_t>(b.size)));
    for (int c = 0; c < b.kept(); ++c) out[lb.high_offset[bi] + static_cast<std::size_t>(c)] = v(c);
  }
  return out;
}

SmallVector block_slice(std::span<const double> v, std::size_t offset, int n) {
  SmallVector out(n);
  for (int k = 0; k < n; ++k) out(k) = v[offset + static_cast<std::size_t>(k)];
  return out;
}

void store(const SmallVector& v, std::vector<double>& out, std::size_t offset) {
  for (Eigen::Index k = 0; k < v.size(); ++k) out[offset + static_cast<std::size_t>(k)] = v(k);
}

// R_enc (b* - b') per block.
std::vector<double> orthonormal_residual(const TransformGeometry& geo, int level, std::span<const double> b_star,
                                         std::span<const double> b_prime) {
  const auto& lb = geo.level(level);
  std::vector<double> out(lb.high_count);
  for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
    const auto& b = lb.blocks[bi];
    const auto off = lb.high_offset[bi];
    const SmallVector v = block_slice(b_star, off, b.kept()) - block_slice(b_prime, off, b.kept());
    store(b.isqrt_encoder * v, out, off);
  }
  return out;
}

struct LevelReconstruction {
  std::vector<double> predicted;  // R_dec b'
  std::vector<double> highpass;   // R_dec (dequantized + predicted)
  std::vector<double> next;       // F^_{l+1}
};

LevelReconstruction reconstruct_level(const TransformGeometry& geo, int level, std::span<const double> lowpass,
                                      std::span<const double> dequantized, std::span<const double> b_prime) {
  const auto& lb = geo.level(level);
  if (dequantized.size() != lb.high_count)
    fail(ErrorKind::Shape, "level " + std::to_string(level) + " expects " + std::to_string(lb.high_count) +
                               " high-pass coefficients, got " + std::to_string(dequantized.size()));
  LevelReconstruction r;
  r.predicted.resize(lb.high_count);
  r.highpass.resize(lb.high_count);
  for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
    const auto& b = lb.blocks[bi];
    const auto off = lb.high_offset[bi];
    const SmallVector hp = b.isqrt_decoder * block_slice(b_prime, off, b.kept());
    store(hp, r.predicted, off);
    const SmallVector s = block_slice(dequantized, off, b.kept()) + hp;
    store(b.isqrt_decoder * s, r.highpass, off);
  }
  r.next = synthesize(geo, level, lowpass, r.highpass);
  return r;
}

std::vector<double> quantize_group(const std::vector<double>& coded, double step, QuantMode mode,
                                   std::vector<std::int64_t>* symbols) {
  if (mode == QuantMode::Identity) return coded;
  *symbols = quantize(coded, step);
  return dequantize(*symbols, step);
}

std::vector<double> difference(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

std::vector<double> interleave(const LevelHierarchy& h, const std::vector<std::vector<double>>& leaves) {
  const std::size_t channels = leaves.size();
  std::vector<double> out(h.num_points() * channels);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t k = 0; k < h.num_points(); ++k) out[h.leaf_point[k] * channels + c] = leaves[c][k];
  return out;
}

}  // namespace

EncodeOutput encode_attributes(const CloudGeometry& cg, const TransformGeometry& geo, const ModelParams& params,
                               const VoxelizedCloud& cloud, const PipelineOptions& opt) {
  const auto& h = cg.hierarchy;
  if (cloud.size() != h.num_points())
    fail(ErrorKind::Shape, "cloud has " + std::to_string(cloud.size()) + " points, geometry has " +
                               std::to_string(h.num_points()));
  const std::size_t channels = cloud.channels;
  const int l0 = h.root_level;
  const auto levels = static_cast<std::size_t>(h.num_transform_levels());

  EncodeOutput out;
  auto& coef = out.coefficients;
  coef.root.resize(channels);
  coef.high.assign(channels, std::vector<std::vector<double>>(levels));
  if (opt.quant == QuantMode::Round)
    out.quantized.groups.assign(levels + 1, std::vector<std::vector<std::int64_t>>(channels));
  auto symbols = [&](std::size_t group, std::size_t c) {
    return opt.quant == QuantMode::Round ? &out.quantized.groups[group][c] : nullptr;
  };

  std::vector<LowpassPyramid> lowpass(channels);
  std::vector<double> leaf(h.num_points());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < leaf.size(); ++k) leaf[k] = cloud.attribute(h.leaf_point[k], c);
    lowpass[c] = analyze_lowpass(h, geo.analysis, geo.gram, leaf);
  }

  std::vector<std::vector<double>> fhat(channels);
  auto& tape = out.tape;
  if (opt.keep_tape) {
    tape.root_coded.resize(channels);
    tape.root_dequantized.resize(channels);
    tape.root_reconstructed.resize(channels);
    tape.levels.assign(channels, std::vector<LevelTape>(levels));
  }
  for (std::size_t c = 0; c < channels; ++c) {
    const auto& ft = lowpass[c].unnormalized[static_cast<std::size_t>(l0)];
    auto& coded = coef.root[c];
    coded.resize(ft.size());
    for (std::size_t i = 0; i < ft.size(); ++i) coded[i] = geo.root_isqrt_encoder[i] * ft[i];
    const auto deq = quantize_group(coded, params.quantizer.step_for(c), opt.quant, symbols(0, c));
    fhat[c].resize(deq.size());
    for (std::size_t i = 0; i < deq.size(); ++i) fhat[c][i] = geo.root_isqrt_decoder[i] * deq[i];
    if (opt.keep_tape) {
      tape.root_coded[c] = coded;
      tape.root_dequantized[c] = deq;
      tape.root_reconstructed[c] = fhat[c];
    }
  }

  for (int l = l0; l < h.depth; ++l) {
    const auto idx = static_cast<std::size_t>(l - l0);
    auto pred = predict_level(cg, geo, params, l, fhat, opt);
    if (opt.keep_tape && params.predictor == PredictorKind::Pbf && !opt.predictor_override) {
      tape.guides.push_back(pred.guide);
      tape.pbf_weights.push_back(pred.weights);
    }
    for (std::size_t c = 0; c < channels; ++c) {
      auto b_star = complement(geo, l, lowpass[c].normalized[static_cast<std::size_t>(l) + 1]);
      auto b_prime = complement(geo, l, difference(pred.prediction[c], pred.upsampled[c]));
      auto& coded = coef.high[c][idx];
      coded = orthonormal_residual(geo, l, b_star, b_prime);
      auto deq = quantize_group(coded, params.quantizer.step_for(c), opt.quant, symbols(idx + 1, c));
      auto rec = reconstruct_level(geo, l, fhat[c], deq, b_prime);
      if (opt.keep_tape) {
        auto& t = tape.levels[c][idx];
        t.upsampled = std::move(pred.upsampled[c]);
        t.prediction = std::move(pred.prediction[c]);
        t.b_star = std::move(b_star);
        t.b_prime = std::move(b_prime);
        t.coded = coded;
        t.dequantized = std::move(deq);
        t.predicted = std::move(rec.predicted);
        t.highpass = std::move(rec.highpass);
        t.reconstructed = rec.next;
      }
      fhat[c] = std::move(rec.next);
    }
  }
  out.reconstruction = interleave(h, fhat);
  if (opt.keep_tape) tape.lowpass = std::move(lowpass);
  return out;
}

std::vector<double> decode_attributes(const CloudGeometry& cg, const TransformGeometry& geo,
                                      const ModelParams& params, const CoefficientPyramid& coef,
                                      const PipelineOptions& opt) {
  const auto& h = cg.hierarchy;
  const int l0 = h.root_level;
  const std::size_t channels = coef.channels();
  const auto levels = static_cast<std::size_t>(h.num_transform_levels());
  if (coef.high.size() != channels) fail(ErrorKind::Shape, "coefficient pyramid channel mismatch");

  std::vector<std::vector<double>> fhat(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const auto& deq = coef.root[c];
    if (deq.size() != h.count(l0) || coef.high[c].size() != levels)
      fail(ErrorKind::Shape, "coefficient pyramid does not match the geometry");
    fhat[c].resize(deq.size());
    for (std::size_t i = 0; i < deq.size(); ++i) fhat[c][i] = geo.root_isqrt_decoder[i] * deq[i];
  }
  for (int l = l0; l < h.depth; ++l) {
    const auto idx = static_cast<std::size_t>(l - l0);
    const auto pred = predict_level(cg, geo, params, l, fhat, opt);
    for (std::size_t c = 0; c < channels; ++c) {
      const auto b_prime = complement(geo, l, difference(pred.prediction[c], pred.upsampled[c]));
      fhat[c] = reconstruct_level(geo, l, fhat[c], coef.high[c][idx], b_prime).next;
    }
  }
  return interleave(h, fhat);
}

CoefficientPyramid dequantize(const QuantizedPyramid& q, const QuantizerConfig& cfg) {
  CoefficientPyramid out;
  if (q.groups.empty()) return out;
  const std::size_t channels = q.groups[0].size();
  out.root.resize(channels);
  out.high.assign(channels, std::vector<std::vector<double>>(q.groups.size() - 1));
  for (std::size_t c = 0; c < channels; ++c) {
    const double step = cfg.step_for(c);
    out.root[c] = dequantize(q.groups[0][c], step);
    for (std::size_t g = 1; g < q.groups.size(); ++g) out.high[c][g - 1] = dequantize(q.groups[g][c], step);
  }
  return out;
}

BitstreamHeader make_header(const CloudGeometry& cg, const TransformGeometry& geo, const ModelParams& params,
                            std::size_t channels) {
  if (channels == 0 || channels > 255) fail(ErrorKind::Shape, "channel count must be in 1..255");
  BitstreamHeader hd;
  hd.depth = static_cast<std::uint8_t>(cg.depth());
  hd.root_level = static_cast<std::uint8_t>(cg.root_level());
  hd.predictor = params.predictor;
  hd.channels = static_cast<std::uint8_t>(channels);
  hd.step = params.quantizer.step;
  for (std::size_t c = 0; c < channels; ++c)
    hd.channel_scale.push_back(params.quantizer.step_for(c) / params.quantizer.step);
  hd.geometry_checksum = cg.checksum;
  hd.counts.push_back(static_cast<std::uint32_t>(cg.hierarchy.count(cg.root_level())));
  for (const auto& lb : geo.levels) hd.counts.push_back(static_cast<std::uint32_t>(lb.high_count));
  return hd;
}

EncodedCloud encode_cloud(const VoxelizedCloud& cloud, const ModelParams& params, int root_level) {
  validate(cloud);
  validate(params);
  const auto cg = prepare_geometry(cloud, root_level, params.predictor);
  const auto geo = build_transform(cg, params);
  EncodedCloud out;
  out.output = encode_attributes(cg, geo, params, cloud);
  out.stream = write_bitstream(make_header(cg, geo, params, cloud.channels), out.output.quantized);
  return out;
}

DecodedCloud decode_cloud(std::span<const std::uint8_t> bytes, const VoxelizedCloud& geometry,
                          const ModelParams& params) {
  DecodedCloud out;
  auto ds = read_bitstream(bytes);
  out.header = ds.header;
  const auto& hd = out.header;
  if (hd.depth != geometry.depth)
    fail(ErrorKind::Geometry, "stream depth " + std::to_string(hd.depth) + " differs from geometry depth " +
                                  std::to_string(geometry.depth));
  if (hd.geometry_checksum != geometry_checksum(geometry))
    fail(ErrorKind::Geometry, "geometry checksum does not match the stream");

  ModelParams p = params;
  p.predictor = hd.predictor;
  p.quantizer.step = hd.step;
  p.quantizer.channel_scale = hd.channel_scale;
  const auto cg = prepare_geometry(geometry, hd.root_level, p.predictor);
  const auto geo = build_transform(cg, p);
  if (hd.counts[0] != cg.hierarchy.count(cg.root_level()))
    fail(ErrorKind::Decode, "root coefficient count does not match the geometry");
  for (std::size_t i = 0; i < geo.levels.size(); ++i)
    if (hd.counts[i + 1] != geo.levels[i].high_count)
      fail(ErrorKind::Decode, "level " + std::to_string(cg.root_level() + static_cast<int>(i)) +
                                  " coefficient count does not match the geometry");

  const auto coef = dequantize(ds.pyramid, p.quantizer);
  out.cloud.depth = geometry.depth;
  out.cloud.channels = hd.channels;
  out.cloud.positions = geometry.positions;
  out.cloud.attributes = decode_attributes(cg, geo, p, coef);
  return out;
}

}  // namespace rahtpc
