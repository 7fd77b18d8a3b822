#include <doctest.h>

#include <cmath>
#include <random>

#include "rahtpc/cloud_io.hpp"
#include "rahtpc/error.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace rahtpc;

namespace {

std::string ascii_ply(const std::string& body, int n) {
  return "ply\nformat ascii 1.0\nelement vertex " + std::to_string(n) +
         "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n" + body;
}

}  // namespace

TEST_CASE("single vertex is ingested") {
  testing::TempDir dir;
  const auto cloud = load_ply(dir.write("one.ply", ascii_ply("0 0 0 255 0 0\n", 1)), 1);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.depth == 1);
  CHECK(cloud.attribute(0, 0) == 255.0);
  CHECK(cloud.attribute(0, 1) == 0.0);
}

TEST_CASE("duplicate voxels are averaged") {
  testing::TempDir dir;
  const auto cloud = load_ply(dir.write("dup.ply", ascii_ply("1 1 1 100 100 100\n1 1 1 200 200 200\n", 2)), 2);
  REQUIRE(cloud.size() == 1);
  for (std::size_t c = 0; c < 3; ++c) CHECK(cloud.attribute(0, c) == 150.0);
}

TEST_CASE("loaded points are in Morton order") {
  testing::TempDir dir;
  const auto cloud = load_ply(dir.write("o.ply", ascii_ply("1 0 0 1 1 1\n0 0 1 2 2 2\n0 0 0 3 3 3\n", 3)), 1);
  REQUIRE(cloud.size() == 3);
  for (std::size_t i = 1; i < cloud.size(); ++i)
    CHECK(morton_encode(cloud.positions[i - 1]) < morton_encode(cloud.positions[i]));
  CHECK(cloud.attribute(0, 0) == 3.0);
}

TEST_CASE("malformed input is rejected") {
  testing::TempDir dir;
  CHECK_THROWS_AS(load_ply(dir.write("neg.ply", ascii_ply("-1 0 0 1 1 1\n", 1)), 2), Error);
  CHECK_THROWS_AS(load_ply(dir.write("big.ply", ascii_ply("4 0 0 1 1 1\n", 1)), 2), Error);
  CHECK_THROWS_AS(load_ply(dir.write("short.ply", ascii_ply("0 0 0 1 1\n", 1)), 2), Error);
  CHECK_THROWS_AS(load_ply(dir.write("junk.ply", "not a ply\n"), 2), Error);
  CHECK_THROWS_AS(load_ply(dir / "missing.ply", 2), Error);
}

TEST_CASE("colour conversion endpoints") {
  const auto black = rgb_to_yuv(0, 0, 0);
  CHECK(black[0] == doctest::Approx(0.0));
  CHECK(black[1] == doctest::Approx(128.0));
  CHECK(black[2] == doctest::Approx(128.0));
  const auto white = rgb_to_yuv(255, 255, 255);
  CHECK(white[0] == doctest::Approx(255.0));
  CHECK(white[1] == doctest::Approx(128.0));
  CHECK(white[2] == doctest::Approx(128.0));
}

TEST_CASE("rgb to yuv and back is the identity within half a level") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> v(0, 255);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double r = v(rng), g = v(rng), b = v(rng);
    const auto yuv = rgb_to_yuv(r, g, b);
    const auto back = yuv_to_rgb(yuv[0], yuv[1], yuv[2]);
    worst = std::max({worst, std::abs(back[0] - r), std::abs(back[1] - g), std::abs(back[2] - b)});
  }
  CHECK(worst <= 0.5);
}

TEST_CASE("binary write then load round-trips") {
  testing::TempDir dir;
  std::mt19937_64 rng(5);
  const auto cloud = testing::random_cloud(rng, 6, 100);
  write_ply(cloud, dir / "f.ply", PlyAttributeFormat::Float64);
  const auto back = load_ply(dir / "f.ply", 6);
  REQUIRE(back.size() == cloud.size());
  CHECK(back.positions == cloud.positions);
  for (std::size_t i = 0; i < cloud.attributes.size(); ++i)
    CHECK(std::abs(back.attributes[i] - cloud.attributes[i]) <= 1e-6);
}

TEST_CASE("empty cloud writes a valid file") {
  testing::TempDir dir;
  VoxelizedCloud empty;
  empty.depth = 3;
  write_ply(empty, dir / "e.ply");
  CHECK(load_ply(dir / "e.ply", 3).empty());
}

TEST_CASE("crops of a surface round-trip in 8-bit form") {
  testing::TempDir dir;
  const auto scene = testing::surface_scene({6, 2.0, 9});
  write_ply(scene, dir / "s.ply");
  const auto back = load_ply(dir / "s.ply", 6);
  CHECK(back.positions == scene.positions);
  CHECK(back.attributes == scene.attributes);
}

TEST_CASE("validation rejects duplicates and out-of-range points") {
  VoxelizedCloud c;
  c.depth = 1;
  c.positions = {{0, 0, 0}, {0, 0, 0}};
  c.attributes.assign(6, 0.0);
  CHECK_THROWS_AS(validate(c), Error);
  c.positions = {{0, 0, 0}, {2, 0, 0}};
  CHECK_THROWS_AS(validate(c), Error);
  c.positions = {{0, 0, 0}, {1, 0, 0}};
  c.attributes.pop_back();
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("geometry checksum depends on positions only") {
  std::mt19937_64 rng(8);
  auto a = testing::random_cloud(rng, 5, 50);
  auto b = a;
  for (auto& v : b.attributes) v += 1.0;
  CHECK(geometry_checksum(a) == geometry_checksum(b));
  b.positions[0][0] ^= 1;
  CHECK(geometry_checksum(a) != geometry_checksum(canonicalize(b)));
}
