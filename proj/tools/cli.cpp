#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rahtpc/bitstream.hpp"
#include "rahtpc/codec.hpp"
#include "rahtpc/error.hpp"
#include "rahtpc/metrics.hpp"
#include "rahtpc/params.hpp"
#include "rahtpc/trainer.hpp"

namespace rahtpc {

namespace {

struct Options {
  std::string input, geometry, output, params, predictor, csv, config, log;
  std::vector<double> deltas;
  int depth = 10;
  int l0 = 4;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> lambda;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::optional<PredictorKind> predictor_flag(const Options& o) {
  if (o.predictor.empty()) return std::nullopt;
  return parse_predictor(o.predictor);
}

// Parameters from --params or RAHT(1) defaults, covering `levels` levels.
ModelParams load_model(const Options& o, int levels, std::ostream& err) {
  ModelParams p = o.params.empty() ? ModelParams::raht1(std::max(levels, 1)) : load_params(o.params);
  if (p.num_levels() < levels) {
    err << "warning: parameters cover " << p.num_levels() << " levels, repeating the coarsest for "
        << levels - p.num_levels() << " more\n";
    p = with_levels(p, levels);
  }
  if (const auto k = predictor_flag(o)) p.predictor = *k;
  return p;
}

void check_levels(const Options& o) {
  if (o.l0 < 0 || o.l0 >= o.depth)
    fail(ErrorKind::Usage, "--l0 " + std::to_string(o.l0) + " must lie in [0, --depth)");
}

VoxelizedCloud load_nonempty(const std::string& path, int depth) {
  auto cloud = load_ply(path, depth);
  if (cloud.empty()) fail(ErrorKind::EmptyInput, "'" + path + "' has no points");
  return cloud;
}

int cmd_encode(const Options& o, std::ostream& out, std::ostream& err) {
  check_levels(o);
  if (o.deltas.size() > 1) fail(ErrorKind::Usage, "encode takes a single --delta");
  auto params = load_model(o, o.depth - o.l0, err);
  if (!o.deltas.empty()) params.quantizer.step = o.deltas[0];
  const auto yuv = rgb_to_yuv(load_nonempty(o.input, o.depth));
  const auto enc = encode_cloud(yuv, params, o.l0);
  write_file_atomic(o.output, enc.stream.bytes);

  const double n = static_cast<double>(yuv.size());
  std::vector<double> group_bits(enc.output.quantized.groups.size(), 0.0);
  for (const auto& s : enc.stream.segments) group_bits[s.group] += 8.0 * static_cast<double>(s.bytes);
  out << "points=" << yuv.size() << " bits_per_voxel=" << num(8.0 * static_cast<double>(enc.stream.payload_bytes()) / n)
      << " stream_bytes=" << enc.stream.bytes.size() << " predictor=" << to_string(params.predictor)
      << " step=" << num(params.quantizer.step) << " bits: root=" << num(group_bits[0]);
  for (std::size_t g = 1; g < group_bits.size(); ++g)
    out << " l" << o.l0 + static_cast<int>(g) - 1 << "=" << num(group_bits[g]);
  out << "\n";
  return kExitOk;
}

int cmd_decode(const Options& o, std::ostream& out, std::ostream& err) {
  const auto bytes = read_file(o.input);
  const auto header = read_bitstream(bytes).header;
  if (const auto k = predictor_flag(o); k && *k != header.predictor)
    err << "warning: --predictor " << to_string(*k) << " ignored, the stream was coded with "
        << to_string(header.predictor) << "\n";
  Options model = o;
  model.predictor.clear();
  const auto params = load_model(model, header.depth - header.root_level, err);
  const auto geometry = load_nonempty(o.geometry, header.depth);
  const auto dec = decode_cloud(bytes, geometry, params);
  write_ply(yuv_to_rgb(dec.cloud), o.output);
  out << "points=" << dec.cloud.size() << " predictor=" << to_string(header.predictor)
      << " step=" << num(header.step) << " output=" << o.output << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  check_levels(o);
  if (o.deltas.empty()) fail(ErrorKind::Usage, "eval needs at least one --delta");
  const auto params = load_model(o, o.depth - o.l0, err);
  const auto rgb = load_nonempty(o.input, o.depth);
  const auto rows = rd_sweep(rgb, params, o.deltas, o.l0);
  for (const auto& v : monotonicity_violations(rows)) err << "warning: " << v << "\n";
  if (o.csv.empty()) write_rd_csv(out, rows);
  else write_rd_csv(std::filesystem::path(o.csv), rows);
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.lambda) cfg.lambda = *o.lambda;
  validate(cfg);
  const int root = std::min(cfg.root_level, cfg.crop_bits - 1);
  const auto init = load_model(o, cfg.crop_bits - root, err);
  const auto corpus = load_corpus(o.input, o.depth);
  const auto result = train(corpus, cfg, init);
  save_params(result.params, o.output);
  if (!o.log.empty()) {
    std::ostringstream log;
    write_train_log(log, result, cfg.crop_bits, root);
    const auto text = log.str();
    write_file_atomic(o.log, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  out << "iterations=" << result.log.size() - 1 << " heldout_J_initial=" << num(result.initial_heldout)
      << " heldout_J_best=" << num(result.best_heldout) << " best_iteration=" << result.best_iteration << "\n";
  if (result.diverged) {
    err << "error: training stopped early, best parameters saved: " << result.message << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Conditioning:
    case ErrorKind::Prediction:
    case ErrorKind::Training:
      return kExitRuntime;
    default:
      return kExitUsage;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Critically sampled point cloud attribute codec", "rahtpc"};
  app.require_subcommand(1);
  Options o;
  const std::string predictors = "none|linear|gpcc|pbf";
  auto model_options = [&](CLI::App* c) {
    c->add_option("--params", o.params, "model parameter JSON (default: RAHT(1))");
    c->add_option("--predictor", o.predictor, "override the predictor: " + predictors)
        ->check(CLI::IsMember({"none", "linear", "gpcc", "pbf"}));
  };
  auto level_options = [&](CLI::App* c) {
    c->add_option("--depth", o.depth, "bits per coordinate of the input")->capture_default_str();
    c->add_option("--l0", o.l0, "root level of the transform")->capture_default_str();
  };

  auto* enc = app.add_subcommand("encode", "code the attributes of a PLY cloud");
  enc->add_option("--input", o.input, "RGB point cloud (PLY)")->required();
  enc->add_option("--output", o.output, "bitstream path")->required();
  enc->add_option("--delta", o.deltas, "quantizer step");
  model_options(enc);
  level_options(enc);

  auto* dec = app.add_subcommand("decode", "reconstruct attributes onto a geometry");
  dec->add_option("--input", o.input, "bitstream path")->required();
  dec->add_option("--geometry", o.geometry, "PLY with the coded positions")->required();
  dec->add_option("--output", o.output, "RGB output PLY")->required();
  model_options(dec);

  auto* ev = app.add_subcommand("eval", "rate-distortion sweep over quantizer steps");
  ev->add_option("--input", o.input, "RGB point cloud (PLY)")->required();
  ev->add_option("--delta", o.deltas, "quantizer step, repeat for a sweep")->required();
  ev->add_option("--csv", o.csv, "CSV output (default: stdout)");
  model_options(ev);
  level_options(ev);

  auto* tr = app.add_subcommand("train", "fit model parameters on a PLY corpus");
  tr->add_option("--input", o.input, "directory of PLY files")->required();
  tr->add_option("--output", o.output, "trained parameter JSON")->required();
  tr->add_option("--config", o.config, "training config JSON");
  tr->add_option("--log", o.log, "training log CSV");
  tr->add_option("--seed", o.seed, "crop sampling seed");
  tr->add_option("--iterations", o.iterations, "Adam iterations");
  tr->add_option("--lambda", o.lambda, "rate multiplier");
  tr->add_option("--depth", o.depth, "bits per coordinate of the corpus")->capture_default_str();
  model_options(tr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*enc) return cmd_encode(o, out, err);
    if (*dec) return cmd_decode(o, out, err);
    if (*ev) return cmd_eval(o, out, err);
    return cmd_train(o, out, err);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace rahtpc
