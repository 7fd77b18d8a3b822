#include "rahtpc/bitstream.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <zlib.h>

#include "rahtpc/error.hpp"
#include "rahtpc/rlgr.hpp"

namespace rahtpc {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'C', 'A'};

class ByteWriter {
public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out_.insert(out_.end(), b, b + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> s) { out_.insert(out_.end(), s.begin(), s.end()); }

private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n)
      fail(ErrorKind::Decode, std::string("bitstream truncated reading ") + what + " at byte offset " +
                                  std::to_string(pos_));
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> s) {
  return static_cast<std::uint32_t>(::crc32(0L, s.data(), static_cast<uInt>(s.size())));
}

}  // namespace

EncodedStream write_bitstream(const BitstreamHeader& h, const QuantizedPyramid& q) {
  if (q.groups.size() != h.counts.size())
    fail(ErrorKind::Shape, "pyramid group count does not match header counts");
  if (h.channel_scale.size() != h.channels)
    fail(ErrorKind::Shape, "header needs one channel scale per channel");
  if (h.root_level >= h.depth || h.counts.size() != static_cast<std::size_t>(h.depth - h.root_level + 1))
    fail(ErrorKind::Shape, "header counts do not match depth " + std::to_string(h.depth) + " and root level " +
                               std::to_string(h.root_level));
  if (!(h.step > 0.0) || !std::isfinite(h.step)) fail(ErrorKind::Parameter, "header step must be positive");
  for (double s : h.channel_scale)
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorKind::Parameter, "header channel scales must be positive");
  EncodedStream out;
  ByteWriter w(out.bytes);
  for (char c : kMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(kBitstreamVersion);
  w.put(h.depth);
  w.put(h.root_level);
  w.put(static_cast<std::uint8_t>(h.predictor));
  w.put(h.channels);
  w.put(h.step);
  for (double s : h.channel_scale) w.put(s);
  w.put(h.geometry_checksum);
  w.put(static_cast<std::uint16_t>(h.counts.size()));
  for (auto c : h.counts) w.put(c);
  w.put(crc(out.bytes));
  out.header_bytes = out.bytes.size();

  for (std::size_t g = 0; g < q.groups.size(); ++g) {
    if (q.groups[g].size() != h.channels) fail(ErrorKind::Shape, "pyramid channel count mismatch");
    for (std::size_t c = 0; c < h.channels; ++c) {
      const auto& sym = q.groups[g][c];
      if (sym.size() != h.counts[g])
        fail(ErrorKind::Shape, "group " + std::to_string(g) + " has " + std::to_string(sym.size()) +
                                   " symbols, header says " + std::to_string(h.counts[g]));
      const auto payload = rlgr::encode(sym);
      w.put(static_cast<std::uint32_t>(payload.size()));
      w.put(crc(payload));
      w.put_bytes(payload);
      out.segments.push_back({g, c, payload.size()});
    }
  }
  return out;
}

DecodedStream read_bitstream(std::span<const std::uint8_t> bytes) {
  DecodedStream out;
  auto& h = out.header;
  ByteReader r(bytes);
  for (char c : kMagic)
    if (r.get<std::uint8_t>("magic") != static_cast<std::uint8_t>(c))
      fail(ErrorKind::Decode, "bad magic: not a rahtpc attribute bitstream");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kBitstreamVersion)
    fail(ErrorKind::Decode, "unsupported bitstream version " + std::to_string(version));
  h.depth = r.get<std::uint8_t>("depth");
  h.root_level = r.get<std::uint8_t>("root level");
  const auto pred = r.get<std::uint8_t>("predictor");
  if (pred > static_cast<std::uint8_t>(PredictorKind::Pbf))
    fail(ErrorKind::Decode, "unknown predictor id " + std::to_string(pred));
  h.predictor = static_cast<PredictorKind>(pred);
  h.channels = r.get<std::uint8_t>("channels");
  h.step = r.get<double>("step");
  for (std::size_t c = 0; c < h.channels; ++c) h.channel_scale.push_back(r.get<double>("channel scale"));
  h.geometry_checksum = r.get<std::uint64_t>("geometry checksum");
  const auto groups = r.get<std::uint16_t>("group count");
  for (std::size_t g = 0; g < groups; ++g) h.counts.push_back(r.get<std::uint32_t>("counts"));
  const std::size_t header_end = r.pos();
  const auto header_crc = r.get<std::uint32_t>("header crc");
  if (header_crc != crc(bytes.first(header_end))) fail(ErrorKind::Decode, "header checksum mismatch");
  if (h.root_level >= h.depth || h.depth > 21)
    fail(ErrorKind::Decode, "inconsistent depth/root level in header");
  if (groups != static_cast<std::size_t>(h.depth - h.root_level) + 1)
    fail(ErrorKind::Decode, "group count does not match depth and root level");
  if (!(h.step > 0.0)) fail(ErrorKind::Decode, "non-positive quantizer step in header");

  out.pyramid.groups.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    out.pyramid.groups[g].resize(h.channels);
    for (std::size_t c = 0; c < h.channels; ++c) {
      const auto len = r.get<std::uint32_t>("segment length");
      const auto seg_crc = r.get<std::uint32_t>("segment crc");
      const std::size_t offset = r.pos();
      const auto payload = r.get_bytes(len, "segment payload");
      if (crc(payload) != seg_crc)
        fail(ErrorKind::Decode, "segment (group " + std::to_string(g) + ", channel " + std::to_string(c) +
                                    ") checksum mismatch at byte offset " + std::to_string(offset));
      try {
        out.pyramid.groups[g][c] = rlgr::decode(payload, h.counts[g]);
      } catch (const Error& e) {
        fail(ErrorKind::Decode, "segment at byte offset " + std::to_string(offset) + ": " + e.what());
      }
    }
  }
  if (r.pos() != bytes.size())
    fail(ErrorKind::Decode, "trailing bytes after the last segment at offset " + std::to_string(r.pos()));
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
}

}  // namespace rahtpc
