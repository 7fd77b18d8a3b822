#include "rahtpc/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "rahtpc/error.hpp"

namespace rahtpc {

std::vector<std::vector<double>> VoxelizedCloud::channel_major() const {
  std::vector<std::vector<double>> planes(channels, std::vector<double>(size()));
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t c = 0; c < channels; ++c) planes[c][i] = attribute(i, c);
  return planes;
}

void VoxelizedCloud::set_channel_major(const std::vector<std::vector<double>>& planes) {
  if (planes.size() != channels) fail(ErrorKind::Shape, "channel count mismatch");
  for (std::size_t c = 0; c < channels; ++c) {
    if (planes[c].size() != size()) fail(ErrorKind::Shape, "channel length mismatch");
    for (std::size_t i = 0; i < size(); ++i) attribute(i, c) = planes[c][i];
  }
}

void validate(const VoxelizedCloud& cloud) {
  if (cloud.depth < 0 || cloud.depth > kMaxDepth)
    fail(ErrorKind::Range, "depth " + std::to_string(cloud.depth) + " outside [0, 21]");
  if (cloud.attributes.size() != cloud.size() * cloud.channels)
    fail(ErrorKind::Shape, "attribute table has " + std::to_string(cloud.attributes.size()) +
                               " entries, expected " +
                               std::to_string(cloud.size() * cloud.channels));
  const std::int64_t limit = std::int64_t{1} << cloud.depth;
  std::vector<MortonCode> codes;
  codes.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const auto v = cloud.positions[i][a];
      if (v < 0 || v >= limit)
        fail(ErrorKind::Range, "point " + std::to_string(i) + " coordinate " +
                                   std::to_string(v) + " does not fit in " +
                                   std::to_string(cloud.depth) + " bits");
    }
    codes.push_back(morton_encode(cloud.positions[i]));
  }
  std::sort(codes.begin(), codes.end());
  if (std::adjacent_find(codes.begin(), codes.end()) != codes.end())
    fail(ErrorKind::Range, "duplicate voxel positions");
}

VoxelizedCloud canonicalize(VoxelizedCloud cloud) {
  const std::size_t n = cloud.size();
  if (cloud.attributes.size() != n * cloud.channels)
    fail(ErrorKind::Shape, "attribute table does not match point count");
  std::vector<MortonCode> codes(n);
  for (std::size_t i = 0; i < n; ++i) codes[i] = morton_encode(cloud.positions[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return codes[a] < codes[b]; });

  VoxelizedCloud out;
  out.depth = cloud.depth;
  out.channels = cloud.channels;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::vector<double> sum(cloud.channels, 0.0);
    while (j < n && codes[order[j]] == codes[order[i]]) {
      for (std::size_t c = 0; c < cloud.channels; ++c) sum[c] += cloud.attribute(order[j], c);
      ++j;
    }
    out.positions.push_back(cloud.positions[order[i]]);
    for (std::size_t c = 0; c < cloud.channels; ++c)
      out.attributes.push_back(sum[c] / static_cast<double>(j - i));
    i = j;
  }
  return out;
}

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  return std::nullopt;
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
};

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

double decode_value(PlyType t, const unsigned char* p) {
  switch (t) {
    case PlyType::Int8: return load_le<std::int8_t>(p);
    case PlyType::UInt8: return load_le<std::uint8_t>(p);
    case PlyType::Int16: return load_le<std::int16_t>(p);
    case PlyType::UInt16: return load_le<std::uint16_t>(p);
    case PlyType::Int32: return load_le<std::int32_t>(p);
    case PlyType::UInt32: return load_le<std::uint32_t>(p);
    case PlyType::Float32: return load_le<float>(p);
    case PlyType::Float64: return load_le<double>(p);
  }
  return 0.0;
}

PlyHeader read_header(std::istream& in, const std::string& path, std::size_t& line_no) {
  PlyHeader h;
  std::string line;
  line_no = 0;
  auto bad = [&](const std::string& msg) {
    fail(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line)) bad("empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") bad("missing 'ply' magic");
  bool have_format = false;
  while (true) {
    if (!std::getline(in, line)) bad("unexpected end of header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key.empty() || key == "comment" || key == "obj_info") continue;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (fmt == "ascii") h.binary = false;
      else if (fmt == "binary_little_endian") h.binary = true;
      else bad("unsupported format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      PlyElement e;
      long long count = -1;
      ss >> e.name >> count;
      if (e.name.empty() || count < 0) bad("malformed element line");
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (key == "property") {
      if (h.elements.empty()) bad("property before any element");
      PlyProperty p;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ss >> count_type >> item_type >> p.name;
        auto ct = parse_type(count_type);
        auto it = parse_type(item_type);
        if (!ct || !it) bad("unknown list property type");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
      } else {
        auto t = parse_type(type);
        if (!t) bad("unknown property type '" + type + "'");
        p.type = *t;
        ss >> p.name;
      }
      if (p.name.empty()) bad("property without a name");
      h.elements.back().properties.push_back(p);
    } else {
      bad("unexpected header keyword '" + key + "'");
    }
  }
  if (!have_format) bad("missing format line");
  return h;
}

struct VertexColumns {
  int x = -1, y = -1, z = -1, r = -1, g = -1, b = -1;
};

VertexColumns locate_columns(const PlyElement& vertex, const std::string& path) {
  VertexColumns cols;
  for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
    const auto& p = vertex.properties[i];
    const int idx = static_cast<int>(i);
    if (p.is_list) continue;
    if (p.name == "x") cols.x = idx;
    else if (p.name == "y") cols.y = idx;
    else if (p.name == "z") cols.z = idx;
    else if (p.name == "red" || p.name == "r") cols.r = idx;
    else if (p.name == "green" || p.name == "g") cols.g = idx;
    else if (p.name == "blue" || p.name == "b") cols.b = idx;
  }
  if (cols.x < 0 || cols.y < 0 || cols.z < 0)
    fail(ErrorKind::Parse, path + ": vertex element lacks x/y/z properties");
  if (cols.r < 0 || cols.g < 0 || cols.b < 0)
    fail(ErrorKind::Parse, path + ": vertex element lacks red/green/blue properties");
  return cols;
}

std::int32_t to_voxel(double v, std::size_t point, int depth, const std::string& path) {
  if (!std::isfinite(v))
    fail(ErrorKind::Range, path + ": point " + std::to_string(point) + " has a non-finite coordinate");
  const double r = std::round(v);
  const double limit = std::ldexp(1.0, depth);
  if (r < 0.0 || r >= limit)
    fail(ErrorKind::Range, path + ": point " + std::to_string(point) + " coordinate " +
                               std::to_string(v) + " outside [0, " +
                               std::to_string(static_cast<long long>(limit) - 1) + "]");
  return static_cast<std::int32_t>(r);
}

}  // namespace

VoxelizedCloud load_ply(const std::filesystem::path& path, int depth) {
  if (depth < 0 || depth > kMaxDepth)
    fail(ErrorKind::Parameter, "depth " + std::to_string(depth) + " outside [0, 21]");
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + name + "' for reading");

  std::size_t line_no = 0;
  PlyHeader header = read_header(in, name, line_no);

  VoxelizedCloud cloud;
  cloud.depth = depth;
  cloud.channels = 3;

  for (const auto& element : header.elements) {
    const bool is_vertex = element.name == "vertex";
    VertexColumns cols;
    if (is_vertex) {
      cols = locate_columns(element, name);
      cloud.positions.reserve(element.count);
      cloud.attributes.reserve(element.count * 3);
    }
    std::vector<double> row(element.properties.size());

    if (header.binary) {
      std::vector<unsigned char> buf(8);
      for (std::size_t i = 0; i < element.count; ++i) {
        for (std::size_t p = 0; p < element.properties.size(); ++p) {
          const auto& prop = element.properties[p];
          auto read_one = [&](PlyType t) {
            const auto offset = static_cast<long long>(in.tellg());
            if (!in.read(reinterpret_cast<char*>(buf.data()),
                         static_cast<std::streamsize>(type_size(t))))
              fail(ErrorKind::Parse, name + ": truncated binary body at byte offset " +
                                         std::to_string(offset) + " (element '" +
                                         element.name + "' row " + std::to_string(i) + ")");
            return decode_value(t, buf.data());
          };
          if (prop.is_list) {
            const double n = read_one(prop.count_type);
            if (n < 0) fail(ErrorKind::Parse, name + ": negative list length");
            for (long long k = 0; k < static_cast<long long>(n); ++k) read_one(prop.type);
          } else {
            row[p] = read_one(prop.type);
          }
        }
        if (is_vertex) {
          cloud.positions.push_back({to_voxel(row[cols.x], i, depth, name),
                                     to_voxel(row[cols.y], i, depth, name),
                                     to_voxel(row[cols.z], i, depth, name)});
          cloud.attributes.insert(cloud.attributes.end(), {row[cols.r], row[cols.g], row[cols.b]});
        }
      }
    } else {
      std::string line;
      for (std::size_t i = 0; i < element.count; ++i) {
        if (!std::getline(in, line))
          fail(ErrorKind::Parse, name + ":" + std::to_string(line_no + 1) +
                                     ": unexpected end of file in element '" + element.name + "'");
        ++line_no;
        std::istringstream ss(line);
        auto next = [&]() {
          double v;
          if (!(ss >> v))
            fail(ErrorKind::Parse, name + ":" + std::to_string(line_no) + ": malformed value");
          return v;
        };
        for (std::size_t p = 0; p < element.properties.size(); ++p) {
          const auto& prop = element.properties[p];
          if (prop.is_list) {
            const double n = next();
            for (long long k = 0; k < static_cast<long long>(n); ++k) next();
          } else {
            row[p] = next();
          }
        }
        if (is_vertex) {
          cloud.positions.push_back({to_voxel(row[cols.x], i, depth, name),
                                     to_voxel(row[cols.y], i, depth, name),
                                     to_voxel(row[cols.z], i, depth, name)});
          cloud.attributes.insert(cloud.attributes.end(), {row[cols.r], row[cols.g], row[cols.b]});
        }
      }
    }
    if (is_vertex) break;
  }
  return canonicalize(std::move(cloud));
}

namespace {

template <typename T>
void store_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

const char* channel_name(std::size_t c, std::size_t channels, std::string& scratch) {
  static const char* rgb[] = {"red", "green", "blue"};
  if (channels == 3) return rgb[c];
  scratch = "attr" + std::to_string(c);
  return scratch.c_str();
}

}  // namespace

void write_ply(const VoxelizedCloud& cloud, const std::filesystem::path& path,
               PlyAttributeFormat format) {
  validate(cloud);
  std::string body;
  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\n";
  hdr << "element vertex " << cloud.size() << "\n";
  hdr << "property int x\nproperty int y\nproperty int z\n";
  const char* type = format == PlyAttributeFormat::UInt8 ? "uchar" : "double";
  std::string scratch;
  for (std::size_t c = 0; c < cloud.channels; ++c)
    hdr << "property " << type << " " << channel_name(c, cloud.channels, scratch) << "\n";
  hdr << "end_header\n";
  body = hdr.str();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) store_le<std::int32_t>(body, cloud.positions[i][a]);
    for (std::size_t c = 0; c < cloud.channels; ++c) {
      const double v = cloud.attribute(i, c);
      if (format == PlyAttributeFormat::UInt8) {
        const double r = std::clamp(std::round(v), 0.0, 255.0);
        store_le<std::uint8_t>(body, static_cast<std::uint8_t>(r));
      } else {
        store_le<double>(body, v);
      }
    }
  }

  // temp + rename keeps readers from seeing a partial file
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) fail(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

namespace {
constexpr double kKr = 0.2126;
constexpr double kKb = 0.0722;
constexpr double kKg = 1.0 - kKr - kKb;
constexpr double kCb = 2.0 * (1.0 - kKb);  // 1.8556
constexpr double kCr = 2.0 * (1.0 - kKr);  // 1.5748
constexpr double kChromaOffset = 128.0;
}  // namespace

std::array<double, 3> rgb_to_yuv(double r, double g, double b) {
  const double y = kKr * r + kKg * g + kKb * b;
  return {y, (b - y) / kCb + kChromaOffset, (r - y) / kCr + kChromaOffset};
}

std::array<double, 3> yuv_to_rgb(double y, double u, double v) {
  const double r = y + kCr * (v - kChromaOffset);
  const double b = y + kCb * (u - kChromaOffset);
  const double g = (y - kKr * r - kKb * b) / kKg;
  return {r, g, b};
}

namespace {
VoxelizedCloud convert_colors(const VoxelizedCloud& cloud, bool forward) {
  if (cloud.channels != 3)
    fail(ErrorKind::Shape, "color conversion needs 3 channels, cloud has " +
                               std::to_string(cloud.channels));
  VoxelizedCloud out = cloud;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double a = cloud.attribute(i, 0), b = cloud.attribute(i, 1), c = cloud.attribute(i, 2);
    const auto t = forward ? rgb_to_yuv(a, b, c) : yuv_to_rgb(a, b, c);
    for (int k = 0; k < 3; ++k) out.attribute(i, static_cast<std::size_t>(k)) = t[k];
  }
  return out;
}
}  // namespace

VoxelizedCloud rgb_to_yuv(const VoxelizedCloud& cloud) { return convert_colors(cloud, true); }
VoxelizedCloud yuv_to_rgb(const VoxelizedCloud& cloud) { return convert_colors(cloud, false); }

std::uint64_t geometry_checksum(const VoxelizedCloud& cloud) {
  std::vector<MortonCode> codes(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) codes[i] = morton_encode(cloud.positions[i]);
  std::sort(codes.begin(), codes.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(cloud.depth));
  mix(codes.size());
  for (auto c : codes) mix(c);
  return h;
}

}  // namespace rahtpc
