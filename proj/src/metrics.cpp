#include "rahtpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "rahtpc/codec.hpp"
#include "rahtpc/error.hpp"

namespace rahtpc {

double psnr(double mse, double peak) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double YuvPsnr::combined() const { return (6.0 * y + u + v) / 8.0; }

VoxelizedCloud to_rgb8(const VoxelizedCloud& yuv) {
  auto rgb = yuv_to_rgb(yuv);
  for (auto& a : rgb.attributes) a = std::clamp(std::round(a), 0.0, 255.0);
  return rgb;
}

YuvPsnr measure_psnr(const VoxelizedCloud& original_rgb, const VoxelizedCloud& decoded_yuv) {
  if (original_rgb.size() != decoded_yuv.size() || original_rgb.channels != 3 || decoded_yuv.channels != 3)
    fail(ErrorKind::Shape, "PSNR needs two 3-channel clouds of equal size");
  if (original_rgb.empty()) fail(ErrorKind::EmptyInput, "PSNR of an empty cloud");
  const auto ref = rgb_to_yuv(original_rgb);
  const auto rec = rgb_to_yuv(to_rgb8(decoded_yuv));
  std::array<double, 3> se{};
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = ref.attribute(i, c) - rec.attribute(i, c);
      se[c] += d * d;
    }
  const double n = static_cast<double>(ref.size());
  return {psnr(se[0] / n), psnr(se[1] / n), psnr(se[2] / n)};
}

std::vector<RDPoint> rd_sweep(const VoxelizedCloud& rgb, const ModelParams& params, std::span<const double> deltas,
                              int root_level) {
  if (deltas.empty()) fail(ErrorKind::Usage, "an RD sweep needs at least one step");
  const auto yuv = rgb_to_yuv(rgb);
  std::vector<RDPoint> rows;
  for (double delta : deltas) {
    ModelParams p = params;
    p.quantizer.step = delta;
    const auto enc = encode_cloud(yuv, p, root_level);
    const auto dec = decode_cloud(enc.stream.bytes, yuv, p);
    RDPoint row;
    row.delta = delta;
    const double n = static_cast<double>(yuv.size());
    row.bits_per_voxel = 8.0 * static_cast<double>(enc.stream.payload_bytes()) / n;
    row.level_bits.assign(enc.output.quantized.groups.size(), 0.0);
    for (const auto& s : enc.stream.segments) row.level_bits[s.group] += 8.0 * static_cast<double>(s.bytes);
    const auto q = measure_psnr(rgb, dec.cloud);
    row.psnr_y = q.y;
    row.psnr_u = q.u;
    row.psnr_v = q.v;
    row.psnr_yuv = q.combined();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {
std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::vector<std::string> monotonicity_violations(std::span<const RDPoint> rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a].delta < rows[b].delta; });
  std::vector<std::string> out;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& fine = rows[order[k - 1]];
    const auto& coarse = rows[order[k]];
    if (coarse.bits_per_voxel > fine.bits_per_voxel)
      out.push_back("rate rises from " + number(fine.bits_per_voxel) + " to " + number(coarse.bits_per_voxel) +
                    " bpv as the step grows from " + number(fine.delta) + " to " + number(coarse.delta));
    if (coarse.psnr_yuv > fine.psnr_yuv)
      out.push_back("PSNR rises from " + number(fine.psnr_yuv) + " to " + number(coarse.psnr_yuv) +
                    " dB as the step grows from " + number(fine.delta) + " to " + number(coarse.delta));
  }
  return out;
}

void write_rd_csv(std::ostream& out, std::span<const RDPoint> rows) {
  out << "delta,bits_per_voxel,psnr_y,psnr_u,psnr_v,psnr_yuv\n";
  for (const auto& r : rows)
    out << number(r.delta) << ',' << number(r.bits_per_voxel) << ',' << number(r.psnr_y) << ','
        << number(r.psnr_u) << ',' << number(r.psnr_v) << ',' << number(r.psnr_yuv) << '\n';
}

void write_rd_csv(const std::filesystem::path& path, std::span<const RDPoint> rows) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
    write_rd_csv(out, rows);
    if (!out) fail(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
}

}  // namespace rahtpc
