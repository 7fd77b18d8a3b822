#include "rahtpc/params.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rahtpc/error.hpp"

namespace rahtpc {

using nlohmann::json;

ModelParams ModelParams::raht1(int num_levels, PredictorKind predictor, int taylor_order, int pbf_order) {
  if (num_levels < 1) fail(ErrorKind::Parameter, "a model needs at least one level");
  ModelParams p;
  p.predictor = predictor;
  LevelParams lp;
  lp.taylor_encoder = taylor_inv_sqrt_coefficients(taylor_order);
  lp.taylor_decoder = lp.taylor_encoder;
  lp.pbf = PbfParams::defaults(pbf_order);
  p.levels.assign(static_cast<std::size_t>(num_levels), lp);
  p.rate_model.root = {0.0, 64.0};
  p.rate_model.levels.assign(static_cast<std::size_t>(num_levels), LaplaceParams{0.0, 8.0});
  return p;
}

namespace {
std::size_t level_slot(const ModelParams& p, int depth, int level) {
  const int slot = depth - 1 - level;
  if (slot < 0 || slot >= p.num_levels())
    fail(ErrorKind::Parameter, "parameters cover " + std::to_string(p.num_levels()) +
                                   " levels; level " + std::to_string(level) + " of a depth-" +
                                   std::to_string(depth) + " cloud needs " + std::to_string(slot + 1));
  return static_cast<std::size_t>(slot);
}
}  // namespace

const LevelParams& ModelParams::level(int depth, int l) const { return levels[level_slot(*this, depth, l)]; }
LevelParams& ModelParams::level(int depth, int l) { return levels[level_slot(*this, depth, l)]; }

const LaplaceParams& ModelParams::rate_for(int depth, int l) const {
  return rate_model.levels[level_slot(*this, depth, l)];
}

const AKernel& ModelParams::synthesis_kernel(int depth, int l) const {
  const auto& lp = level(depth, l);
  return tied_kernels ? lp.analysis_kernel : lp.synthesis_kernel;
}

void validate(const ModelParams& p) {
  if (p.levels.empty()) fail(ErrorKind::Parameter, "levels: at least one level is required");
  if (p.rate_model.levels.size() != p.levels.size())
    fail(ErrorKind::Parameter, "rate_model.levels: expected one entry per level");
  validate(p.quantizer);
  auto check_laplace = [](const LaplaceParams& lp, const std::string& field) {
    if (!(lp.diversity > 0.0) || !std::isfinite(lp.diversity) || !std::isfinite(lp.location))
      fail(ErrorKind::Parameter, field + ": diversity must be positive and values finite");
  };
  check_laplace(p.rate_model.root, "rate_model.root");
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    const std::string prefix = "levels[" + std::to_string(i) + "]";
    check_laplace(p.rate_model.levels[i], "rate_model.levels[" + std::to_string(i) + "]");
    const auto& lp = p.levels[i];
    for (int d = 0; d < 8; ++d) {
      if (!(lp.analysis_kernel[static_cast<std::size_t>(d)] > 0.0))
        fail(ErrorKind::Parameter, prefix + ".analysis_kernel: entries must be positive");
      if (!p.tied_kernels && !(lp.synthesis_kernel[static_cast<std::size_t>(d)] > 0.0))
        fail(ErrorKind::Parameter, prefix + ".synthesis_kernel: entries must be positive");
    }
    if (p.inv_sqrt == InvSqrtMode::Taylor && (lp.taylor_encoder.empty() || lp.taylor_decoder.empty()))
      fail(ErrorKind::Parameter, prefix + ".taylor: Taylor mode needs coefficients");
    if (p.predictor == PredictorKind::Pbf) {
      if (!(lp.pbf.sigma_x > 0.0) || !(lp.pbf.sigma_y > 0.0))
        fail(ErrorKind::Parameter, prefix + ".pbf: sigmas must be positive");
      if (lp.pbf.r.empty()) fail(ErrorKind::Parameter, prefix + ".pbf.r: needs r_0");
    }
  }
}

ModelParams with_levels(const ModelParams& p, int num_levels) {
  if (p.levels.empty()) fail(ErrorKind::Parameter, "levels: at least one level is required");
  ModelParams out = p;
  while (out.num_levels() < num_levels) {
    out.levels.push_back(out.levels.back());
    out.rate_model.levels.push_back(out.rate_model.levels.back());
  }
  return out;
}

std::vector<AKernel> analysis_kernels(const ModelParams& p, int depth, int root_level) {
  std::vector<AKernel> out;
  for (int l = root_level; l < depth; ++l) out.push_back(p.level(depth, l).analysis_kernel);
  return out;
}

std::vector<AKernel> synthesis_kernels(const ModelParams& p, int depth, int root_level) {
  std::vector<AKernel> out;
  for (int l = root_level; l < depth; ++l) out.push_back(p.synthesis_kernel(depth, l));
  return out;
}

InvSqrtNetworks inv_sqrt_networks(const ModelParams& p, int depth, int root_level) {
  InvSqrtNetworks nets;
  for (int l = root_level; l < depth; ++l) {
    const auto& lp = p.level(depth, l);
    nets.encoder.push_back({p.inv_sqrt, lp.taylor_encoder});
    nets.decoder.push_back({p.inv_sqrt, lp.taylor_decoder});
  }
  return nets;
}

namespace {

const char* to_string(InvSqrtMode m) { return m == InvSqrtMode::Exact ? "exact" : "taylor"; }

json laplace_to_json(const LaplaceParams& l) { return {{"location", l.location}, {"diversity", l.diversity}}; }

template <typename T>
T field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    fail(ErrorKind::Parse, "params: missing field '" + path + "." + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Parse, "params: field '" + path + "." + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& path) {
  for (const auto& [key, value] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      fail(ErrorKind::Parse, "params: unknown field '" + path + "." + key + "'");
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const char* key, const std::string& path) {
  auto v = field<std::vector<double>>(j, key, path);
  if (v.size() != N)
    fail(ErrorKind::Parse, "params: field '" + path + "." + key + "' needs " + std::to_string(N) + " values");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

LaplaceParams laplace_from_json(const json& j, const std::string& path) {
  return {field<double>(j, "location", path), field<double>(j, "diversity", path)};
}

}  // namespace

std::string params_to_json(const ModelParams& p) {
  json j;
  j["format"] = "rahtpc-params";
  j["version"] = ModelParams::kFormatVersion;
  j["predictor"] = rahtpc::to_string(p.predictor);
  j["inv_sqrt"] = to_string(p.inv_sqrt);
  j["tied_kernels"] = p.tied_kernels;
  j["quantizer"] = {{"step", p.quantizer.step}, {"channel_scale", p.quantizer.channel_scale}};
  json rate;
  rate["root"] = laplace_to_json(p.rate_model.root);
  rate["levels"] = json::array();
  for (const auto& l : p.rate_model.levels) rate["levels"].push_back(laplace_to_json(l));
  j["rate_model"] = rate;
  j["levels"] = json::array();
  for (const auto& lp : p.levels) {
    json e;
    e["analysis_kernel"] = lp.analysis_kernel;
    e["synthesis_kernel"] = lp.synthesis_kernel;
    e["taylor_encoder"] = lp.taylor_encoder;
    e["taylor_decoder"] = lp.taylor_decoder;
    e["linear_weights"] = lp.linear.w;
    e["pbf"] = {{"sigma_x", lp.pbf.sigma_x}, {"sigma_y", lp.pbf.sigma_y}, {"r", lp.pbf.r}};
    j["levels"].push_back(e);
  }
  return j.dump(2);
}

ModelParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("params: malformed JSON: ") + e.what());
  }
  if (field<std::string>(j, "format", "") != "rahtpc-params")
    fail(ErrorKind::Parse, "params: field '.format' must be \"rahtpc-params\"");
  const int version = field<int>(j, "version", "");
  if (version != ModelParams::kFormatVersion)
    fail(ErrorKind::Parse, "params: unsupported version " + std::to_string(version));

  reject_unknown(j, {"format", "version", "predictor", "inv_sqrt", "tied_kernels", "quantizer", "rate_model", "levels"},
                 "");
  ModelParams p;
  try {
    p.predictor = parse_predictor(field<std::string>(j, "predictor", ""));
  } catch (const Error&) {
    fail(ErrorKind::Parse, "params: field '.predictor' names an unknown predictor");
  }
  const auto mode = field<std::string>(j, "inv_sqrt", "");
  if (mode == "exact") p.inv_sqrt = InvSqrtMode::Exact;
  else if (mode == "taylor") p.inv_sqrt = InvSqrtMode::Taylor;
  else fail(ErrorKind::Parse, "params: field '.inv_sqrt' must be exact|taylor");
  p.tied_kernels = field<bool>(j, "tied_kernels", "");

  const auto q = field<json>(j, "quantizer", "");
  p.quantizer.step = field<double>(q, "step", ".quantizer");
  p.quantizer.channel_scale = field<std::vector<double>>(q, "channel_scale", ".quantizer");

  const auto rate = field<json>(j, "rate_model", "");
  p.rate_model.root = laplace_from_json(field<json>(rate, "root", ".rate_model"), ".rate_model.root");
  const auto rate_levels = field<json>(rate, "levels", ".rate_model");
  for (std::size_t i = 0; i < rate_levels.size(); ++i)
    p.rate_model.levels.push_back(
        laplace_from_json(rate_levels[i], ".rate_model.levels[" + std::to_string(i) + "]"));

  const auto levels = field<json>(j, "levels", "");
  if (!levels.is_array()) fail(ErrorKind::Parse, "params: field '.levels' must be an array");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& e = levels[i];
    const std::string path = ".levels[" + std::to_string(i) + "]";
    reject_unknown(e, {"analysis_kernel", "synthesis_kernel", "taylor_encoder", "taylor_decoder", "linear_weights", "pbf"},
                   path);
    LevelParams lp;
    lp.analysis_kernel = fixed_array<8>(e, "analysis_kernel", path);
    lp.synthesis_kernel = fixed_array<8>(e, "synthesis_kernel", path);
    lp.taylor_encoder = field<std::vector<double>>(e, "taylor_encoder", path);
    lp.taylor_decoder = field<std::vector<double>>(e, "taylor_decoder", path);
    lp.linear.w = fixed_array<27>(e, "linear_weights", path);
    const auto pbf = field<json>(e, "pbf", path);
    lp.pbf.sigma_x = field<double>(pbf, "sigma_x", path + ".pbf");
    lp.pbf.sigma_y = field<double>(pbf, "sigma_y", path + ".pbf");
    lp.pbf.r = field<std::vector<double>>(pbf, "r", path + ".pbf");
    p.levels.push_back(std::move(lp));
  }
  try {
    validate(p);
  } catch (const Error& e) {
    fail(ErrorKind::Parse, std::string("params: ") + e.what());
  }
  return p;
}

void save_params(const ModelParams& p, const std::filesystem::path& path) {
  validate(p);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
    out << params_to_json(p) << "\n";
    if (!out) fail(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open params file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

}  // namespace rahtpc
