#include "rahtpc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rahtpc/error.hpp"
#include "rahtpc/rate_model.hpp"
#include "trainer_internal.hpp"

namespace rahtpc {

void validate(const TrainConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) fail(ErrorKind::Parameter, "lambda must be >= 0");
  if (cfg.crop_bits < 1 || cfg.crop_bits > kMaxDepth) fail(ErrorKind::Parameter, "crop_bits must be in 1..21");
  if (cfg.batch_size < 1 || cfg.holdout_size < 1)
    fail(ErrorKind::Parameter, "batch_size and holdout_size must be positive");
  if (cfg.iterations < 0) fail(ErrorKind::Parameter, "iterations must be >= 0");
  if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::Parameter, "learning_rate must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    fail(ErrorKind::Parameter, "Adam betas must be in [0, 1)");
  if (cfg.root_level < 0) fail(ErrorKind::Parameter, "root_level must be >= 0");
  if (cfg.min_crop_points < 1 || cfg.max_crop_attempts < 1)
    fail(ErrorKind::Parameter, "crop rejection settings must be positive");
}

TrainConfig train_config_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("train config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Parse, "train config: expected a JSON object");
  TrainConfig cfg;
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } catch (const json::exception&) {
      fail(ErrorKind::Parse, std::string("train config: field '") + key + "' has the wrong type");
    }
  };
  read("lambda", cfg.lambda);
  read("crop_bits", cfg.crop_bits);
  read("batch_size", cfg.batch_size);
  read("holdout_size", cfg.holdout_size);
  read("iterations", cfg.iterations);
  read("learning_rate", cfg.learning_rate);
  read("beta1", cfg.beta1);
  read("beta2", cfg.beta2);
  read("epsilon", cfg.epsilon);
  read("root_level", cfg.root_level);
  read("seed", cfg.seed);
  read("min_crop_points", cfg.min_crop_points);
  read("max_crop_attempts", cfg.max_crop_attempts);
  if (j.contains("quant")) {
    std::string q;
    read("quant", q);
    if (q == "round") cfg.quant = QuantMode::Round;
    else if (q == "identity") cfg.quant = QuantMode::Identity;
    else fail(ErrorKind::Parse, "train config: field 'quant' must be round|identity");
  }
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"lambda", "crop_bits", "batch_size", "holdout_size", "iterations",
                                  "learning_rate", "beta1", "beta2", "epsilon", "root_level", "seed",
                                  "min_crop_points", "max_crop_attempts", "quant"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      fail(ErrorKind::Parse, "train config: unknown field '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open train config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

std::vector<VoxelizedCloud> load_corpus(const std::filesystem::path& dir, int depth) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) fail(ErrorKind::Io, "corpus '" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ply") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::Data, "corpus '" + dir.string() + "' has no .ply files");
  std::vector<VoxelizedCloud> out;
  for (const auto& f : files) out.push_back(load_ply(f, depth));
  return out;
}

std::vector<VoxelizedCloud> sample_crops(std::span<const VoxelizedCloud> corpus, int count, const TrainConfig& cfg,
                                         std::mt19937_64& rng) {
  if (corpus.empty()) fail(ErrorKind::Data, "training corpus is empty");
  for (const auto& c : corpus)
    if (c.depth < cfg.crop_bits)
      fail(ErrorKind::Parameter, "crop_bits " + std::to_string(cfg.crop_bits) + " exceeds a corpus cloud of depth " +
                                     std::to_string(c.depth));
  const std::int32_t side = std::int32_t{1} << cfg.crop_bits;
  const std::int32_t half = side / 2;
  std::vector<VoxelizedCloud> crops;
  std::uniform_int_distribution<std::size_t> pick_cloud(0, corpus.size() - 1);
  for (int n = 0; n < count; ++n) {
    bool found = false;
    for (int attempt = 0; attempt < cfg.max_crop_attempts && !found; ++attempt) {
      const auto& src = corpus[pick_cloud(rng)];
      if (src.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick_point(0, src.size() - 1);
      const Coord3 centre = src.positions[pick_point(rng)];
      const Coord3 origin{centre[0] - half, centre[1] - half, centre[2] - half};
      VoxelizedCloud crop;
      crop.depth = cfg.crop_bits;
      crop.channels = src.channels;
      for (std::size_t i = 0; i < src.size(); ++i) {
        const auto& p = src.positions[i];
        const Coord3 q{p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]};
        if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= side || q[1] >= side || q[2] >= side) continue;
        crop.positions.push_back(q);
        for (std::size_t c = 0; c < src.channels; ++c) crop.attributes.push_back(src.attribute(i, c));
      }
      if (static_cast<int>(crop.size()) < cfg.min_crop_points) continue;
      crops.push_back(canonicalize(std::move(crop)));
      found = true;
    }
    if (!found)
      fail(ErrorKind::Data, "no crop with at least " + std::to_string(cfg.min_crop_points) + " points after " +
                                std::to_string(cfg.max_crop_attempts) + " attempts");
  }
  return crops;
}

TrainingSample prepare_sample(VoxelizedCloud yuv, int root_level, PredictorKind predictor) {
  TrainingSample s;
  s.geometry = prepare_geometry(yuv, root_level, predictor);
  s.cloud = std::move(yuv);
  return s;
}

namespace detail {

SampleForward forward_sample(const TrainingSample& sample, const ModelParams& params, const ForwardOptions& options,
                             const std::vector<std::vector<double>>* guides, bool keep_tape) {
  const auto& cg = sample.geometry;
  const auto& h = cg.hierarchy;
  SampleForward f;
  f.geo = build_transform(cg, params);

  PipelineOptions opt;
  opt.quant = options.quant;
  opt.keep_tape = keep_tape;
  opt.frozen_guides = guides;
  std::vector<LowpassPyramid> truth;
  if (options.oracle_predictor) {
    std::vector<double> leaf(h.num_points());
    for (std::size_t c = 0; c < sample.cloud.channels; ++c) {
      for (std::size_t k = 0; k < leaf.size(); ++k) leaf[k] = sample.cloud.attribute(h.leaf_point[k], c);
      truth.push_back(analyze_lowpass(h, f.geo.analysis, f.geo.gram, leaf));
    }
    opt.predictor_override = [&truth](int level, std::size_t channel, std::span<const double>) {
      return truth[channel].normalized[static_cast<std::size_t>(level) + 1];
    };
  }
  f.enc = encode_attributes(cg, f.geo, params, sample.cloud, opt);

  for (std::size_t i = 0; i < f.enc.reconstruction.size(); ++i) {
    const double d = f.enc.reconstruction[i] - sample.cloud.attributes[i];
    f.squared_error += d * d;
  }
  f.group_bits.assign(params.num_rate_groups(), 0.0);
  const auto& coef = f.enc.coefficients;
  for (std::size_t c = 0; c < coef.channels(); ++c) {
    const double step = params.quantizer.step_for(c);
    f.group_bits[0] += group_bits(coef.root[c], params.rate_model.root, step);
    for (std::size_t idx = 0; idx < coef.high[c].size(); ++idx) {
      const int l = h.root_level + static_cast<int>(idx);
      const auto slot = static_cast<std::size_t>(h.depth - 1 - l);
      f.group_bits[1 + slot] += group_bits(coef.high[c][idx], params.rate_for(h.depth, l), step);
    }
  }
  for (double b : f.group_bits) f.bits += b;
  if (!std::isfinite(f.squared_error) || !std::isfinite(f.bits)) {
    std::string where = "reconstruction";
    for (std::size_t c = 0; c < coef.channels() && where == "reconstruction"; ++c)
      for (std::size_t idx = 0; idx < coef.high[c].size(); ++idx)
        if (std::any_of(coef.high[c][idx].begin(), coef.high[c][idx].end(), [](double v) { return !std::isfinite(v); })) {
          where = "level " + std::to_string(h.root_level + static_cast<int>(idx)) + " channel " + std::to_string(c);
          break;
        }
    fail(ErrorKind::Training, "non-finite Lagrangian term at " + where);
  }
  return f;
}

}  // namespace detail

namespace {

LagrangianReport summarize(double se, double bits, const std::vector<double>& group_bits, std::size_t points,
                           std::size_t channels, double lambda) {
  LagrangianReport r;
  r.points = points;
  const double n = static_cast<double>(points);
  r.distortion = se / (n * static_cast<double>(channels));
  r.rate = bits / n;
  r.lagrangian = r.distortion + lambda * r.rate;
  for (double b : group_bits) r.group_rate.push_back(b / n);
  return r;
}

const std::vector<std::vector<double>>* guides_for(const ForwardOptions& options, std::size_t sample) {
  return options.frozen_guides ? &options.frozen_guides->at(sample) : nullptr;
}

std::size_t batch_channels(std::span<const TrainingSample> batch) {
  if (batch.empty()) fail(ErrorKind::EmptyInput, "empty training batch");
  const std::size_t c = batch[0].cloud.channels;
  for (const auto& s : batch)
    if (s.cloud.channels != c) fail(ErrorKind::Shape, "batch mixes channel counts");
  return c;
}

}  // namespace

LagrangianReport evaluate_lagrangian(std::span<const TrainingSample> batch, const ModelParams& params,
                                     double lambda, const ForwardOptions& options) {
  const std::size_t channels = batch_channels(batch);
  double se = 0.0, bits = 0.0;
  std::size_t points = 0;
  std::vector<double> groups(params.num_rate_groups(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto f = detail::forward_sample(batch[i], params, options, guides_for(options, i), false);
    se += f.squared_error;
    bits += f.bits;
    for (std::size_t g = 0; g < groups.size(); ++g) groups[g] += f.group_bits[g];
    points += batch[i].cloud.size();
  }
  return summarize(se, bits, groups, points, channels, lambda);
}

LagrangianReport lagrangian_gradient(std::span<const TrainingSample> batch, const ModelParams& params,
                                     double lambda, ModelParams& gradient, const ForwardOptions& options) {
  if (options.oracle_predictor) fail(ErrorKind::Parameter, "the oracle predictor has no gradient");
  const std::size_t channels = batch_channels(batch);
  gradient = zero_gradient(params);
  std::size_t points = 0;
  for (const auto& s : batch) points += s.cloud.size();
  const double n = static_cast<double>(points);
  const double d_se = 1.0 / (n * static_cast<double>(channels));
  const double d_bits = lambda / n;
  double se = 0.0, bits = 0.0;
  std::vector<double> groups(params.num_rate_groups(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto f = detail::forward_sample(batch[i], params, options, guides_for(options, i), true);
    se += f.squared_error;
    bits += f.bits;
    for (std::size_t g = 0; g < groups.size(); ++g) groups[g] += f.group_bits[g];
    detail::backward_sample(batch[i], params, f, options.quant, d_se, d_bits, gradient);
  }
  return summarize(se, bits, groups, points, channels, lambda);
}

std::vector<std::vector<std::vector<double>>> capture_guides(std::span<const TrainingSample> batch,
                                                             const ModelParams& params, QuantMode quant) {
  std::vector<std::vector<std::vector<double>>> out;
  ForwardOptions options;
  options.quant = quant;
  for (const auto& s : batch) out.push_back(detail::forward_sample(s, params, options, nullptr, true).enc.tape.guides);
  return out;
}

ModelParams zero_gradient(const ModelParams& shape) {
  ModelParams g = shape;
  for (auto& lp : g.levels) {
    lp.analysis_kernel.fill(0.0);
    lp.synthesis_kernel.fill(0.0);
    std::fill(lp.taylor_encoder.begin(), lp.taylor_encoder.end(), 0.0);
    std::fill(lp.taylor_decoder.begin(), lp.taylor_decoder.end(), 0.0);
    lp.linear.w.fill(0.0);
    lp.pbf.sigma_x = lp.pbf.sigma_y = 0.0;
    std::fill(lp.pbf.r.begin(), lp.pbf.r.end(), 0.0);
  }
  g.quantizer.step = 0.0;
  std::fill(g.quantizer.channel_scale.begin(), g.quantizer.channel_scale.end(), 0.0);
  g.rate_model.root = {0.0, 0.0};
  for (auto& r : g.rate_model.levels) r = {0.0, 0.0};
  return g;
}

template <typename P, typename F>
void ParamLayout::visit(P& p, F&& f) const {
  for (int s = 0; s < slots_; ++s) {
    auto& lp = p.levels[static_cast<std::size_t>(s)];
    for (auto& w : lp.analysis_kernel) f("analysis_kernel", s, w, true);
    if (untied_)
      for (auto& w : lp.synthesis_kernel) f("synthesis_kernel", s, w, true);
    if (taylor_) {
      for (auto& c : lp.taylor_encoder) f("taylor_encoder", s, c, false);
      for (auto& c : lp.taylor_decoder) f("taylor_decoder", s, c, false);
    }
    if (linear_)
      for (auto& w : lp.linear.w) f("linear_weights", s, w, false);
    if (pbf_) {
      f("pbf_sigma", s, lp.pbf.sigma_x, true);
      f("pbf_sigma", s, lp.pbf.sigma_y, true);
      for (auto& r : lp.pbf.r) f("pbf_r", s, r, false);
    }
    auto& rate = p.rate_model.levels[static_cast<std::size_t>(s)];
    f("rate_location", s, rate.location, false);
    f("rate_diversity", s, rate.diversity, true);
  }
  f("step", -1, p.quantizer.step, true);
  f("rate_location", -1, p.rate_model.root.location, false);
  f("rate_diversity", -1, p.rate_model.root.diversity, true);
}

ParamLayout::ParamLayout(const ModelParams& params, int active_slots)
    : pbf_(params.predictor == PredictorKind::Pbf),
      linear_(params.predictor == PredictorKind::Linear),
      taylor_(params.inv_sqrt == InvSqrtMode::Taylor),
      untied_(!params.tied_kernels),
      slots_(std::min(active_slots, params.num_levels())) {
  if (active_slots < 1) fail(ErrorKind::Parameter, "a parameter layout needs at least one level");
  visit(params, [this](const char* kind, int slot, const double&, bool log_space) {
    if (groups_.empty() || groups_.back().kind != kind || groups_.back().slot != slot ||
        groups_.back().log_space != log_space)
      groups_.push_back({kind, slot, size_, 0, log_space});
    ++groups_.back().size;
    ++size_;
  });
}

std::vector<double> ParamLayout::pack(const ModelParams& params) const {
  std::vector<double> theta;
  theta.reserve(size_);
  visit(params, [&](const char*, int, const double& v, bool log_space) {
    theta.push_back(log_space ? std::log(v) : v);
  });
  return theta;
}

void ParamLayout::unpack(std::span<const double> theta, ModelParams& params) const {
  if (theta.size() != size_) fail(ErrorKind::Shape, "parameter vector has the wrong length");
  std::size_t i = 0;
  visit(params, [&](const char*, int, double& v, bool log_space) {
    v = log_space ? std::exp(theta[i]) : theta[i];
    ++i;
  });
}

std::vector<double> ParamLayout::pack_gradient(const ModelParams& params, const ModelParams& gradient) const {
  const auto values = natural(params);
  std::vector<double> out;
  out.reserve(size_);
  std::size_t i = 0;
  visit(gradient, [&](const char*, int, const double& g, bool log_space) {
    out.push_back(log_space ? g * values[i] : g);
    ++i;
  });
  return out;
}

std::vector<double> ParamLayout::natural(const ModelParams& params) const {
  std::vector<double> out;
  out.reserve(size_);
  visit(params, [&](const char*, int, const double& v, bool) { out.push_back(v); });
  return out;
}

void ParamLayout::set_natural(std::span<const double> values, ModelParams& params) const {
  if (values.size() != size_) fail(ErrorKind::Shape, "parameter vector has the wrong length");
  std::size_t i = 0;
  visit(params, [&](const char*, int, double& v, bool) { v = values[i++]; });
}

ModelParams finite_difference_gradient(std::span<const TrainingSample> batch, const ModelParams& params,
                                       double lambda, const ParamLayout& layout, double fd_step,
                                       const ForwardOptions& options) {
  auto values = layout.natural(params);
  std::vector<double> grad(values.size(), 0.0);
  ModelParams probe = params;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const double h = fd_step * std::max(std::abs(v), 1.0);
    values[i] = v + h;
    layout.set_natural(values, probe);
    const double up = evaluate_lagrangian(batch, probe, lambda, options).lagrangian;
    values[i] = v - h;
    layout.set_natural(values, probe);
    const double down = evaluate_lagrangian(batch, probe, lambda, options).lagrangian;
    values[i] = v;
    grad[i] = (up - down) / (2.0 * h);
  }
  ModelParams out = zero_gradient(params);
  layout.set_natural(grad, out);
  return out;
}

namespace {

std::vector<TrainingSample> prepare_batch(const std::vector<VoxelizedCloud>& crops, int root_level,
                                          PredictorKind predictor) {
  std::vector<TrainingSample> out;
  for (const auto& c : crops) out.push_back(prepare_sample(rgb_to_yuv(c), root_level, predictor));
  return out;
}

}  // namespace

TrainResult train(std::span<const VoxelizedCloud> corpus, const TrainConfig& cfg, const ModelParams& init) {
  validate(cfg);
  validate(init);
  std::mt19937_64 rng(cfg.seed);
  const int root_level = std::min(cfg.root_level, cfg.crop_bits - 1);
  const int slots = cfg.crop_bits - root_level;
  if (init.num_levels() < slots)
    fail(ErrorKind::Parameter, "initial parameters cover " + std::to_string(init.num_levels()) +
                                   " levels, crops need " + std::to_string(slots));
  const auto train_set = prepare_batch(sample_crops(corpus, cfg.batch_size, cfg, rng), root_level, init.predictor);
  const auto heldout_set = prepare_batch(sample_crops(corpus, cfg.holdout_size, cfg, rng), root_level, init.predictor);

  ForwardOptions fwd;
  fwd.quant = cfg.quant;
  const ParamLayout layout(init, slots);
  auto theta = layout.pack(init);
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);

  TrainResult result;
  result.params = init;
  ModelParams current = init;
  ModelParams gradient;
  for (int it = 0; it <= cfg.iterations; ++it) {
    TrainLogRow row;
    row.iteration = it;
    try {
      row.train = lagrangian_gradient(train_set, current, cfg.lambda, gradient, fwd);
      row.heldout_lagrangian = evaluate_lagrangian(heldout_set, current, cfg.lambda, fwd).lagrangian;
    } catch (const Error& e) {
      if (it == 0) throw;
      result.diverged = true;
      result.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    if (!std::isfinite(row.train.lagrangian) || !std::isfinite(row.heldout_lagrangian)) {
      if (it == 0) fail(ErrorKind::Training, "initial Lagrangian is not finite");
      result.diverged = true;
      result.message = "iteration " + std::to_string(it) + ": Lagrangian is not finite";
      break;
    }
    result.log.push_back(row);
    if (it == 0) {
      result.initial_heldout = result.best_heldout = row.heldout_lagrangian;
    } else if (row.heldout_lagrangian < result.best_heldout) {
      result.best_heldout = row.heldout_lagrangian;
      result.best_iteration = it;
      result.params = current;
    }
    if (it == cfg.iterations) break;

    const auto g = layout.pack_gradient(current, gradient);
    const double t = static_cast<double>(it + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      theta[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
    layout.unpack(theta, current);
  }
  return result;
}

void write_train_log(std::ostream& out, const TrainResult& result, int depth, int root_level) {
  out << "iteration,J,D,R,heldout_J,R_root";
  for (int l = root_level; l < depth; ++l) out << ",R_l" << l;
  out << '\n';
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& row : result.log) {
    const auto& r = row.train;
    out << row.iteration << ',' << num(r.lagrangian) << ',' << num(r.distortion) << ',' << num(r.rate) << ','
        << num(row.heldout_lagrangian) << ',' << num(r.group_rate.empty() ? 0.0 : r.group_rate[0]);
    for (int l = root_level; l < depth; ++l) {
      const auto g = static_cast<std::size_t>(1 + depth - 1 - l);
      out << ',' << num(g < r.group_rate.size() ? r.group_rate[g] : 0.0);
    }
    out << '\n';
  }
}

}  // namespace rahtpc
