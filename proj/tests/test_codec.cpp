#include <doctest.h>

#include <cmath>
#include <random>

#include "givens_raht.hpp"
#include "oracle.hpp"
#include "rahtpc/codec.hpp"
#include "rahtpc/error.hpp"
#include "synthetic.hpp"

using namespace rahtpc;

namespace {

constexpr PredictorKind kAll[] = {PredictorKind::None, PredictorKind::Linear, PredictorKind::Gpcc,
                                  PredictorKind::Pbf};

}  // namespace

TEST_CASE("identity quantizer reconstructs exactly under every predictor") {
  std::mt19937_64 rng(11);
  for (auto kind : kAll) {
    CAPTURE(to_string(kind));
    for (int t = 0; t < 5; ++t) {
      const auto cloud = testing::random_cloud(rng, 6, 1500);
      const auto params = testing::random_params(rng, 6, kind);
      const auto r = testing::lossless_round_trip(cloud, params, 2);
      CHECK(r.max_error < 1e-9 * r.range);
      CHECK(r.coefficients == cloud.size());
    }
  }
}

TEST_CASE("coefficient count equals the point count at every root level") {
  std::mt19937_64 rng(12);
  const auto cloud = testing::random_cloud(rng, 5, 300);
  for (int l0 = 0; l0 < 5; ++l0) {
    const auto params = ModelParams::raht1(5 - l0);
    const auto enc = encode_cloud(cloud, params, l0);
    CHECK(enc.output.coefficients.coefficients_per_channel() == cloud.size());
    std::size_t total = 0;
    for (const auto& g : enc.output.quantized.groups) total += g[0].size();
    CHECK(total == cloud.size());
  }
}

TEST_CASE("classical RAHT agreement with Givens butterflies") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 5; ++t) {
    const auto cloud = testing::random_cloud(rng, 4, 120);
    const int l0 = 1;
    const auto params = ModelParams::raht1(3);
    const auto cg = prepare_geometry(cloud, l0, PredictorKind::None);
    const auto geo = build_transform(cg, params);
    PipelineOptions opt;
    opt.quant = QuantMode::Identity;
    const auto out = encode_attributes(cg, geo, params, cloud, opt);
    const auto ref = testing::givens_raht(cloud, 0, l0);
    const auto& h = cg.hierarchy;
    REQUIRE(ref.dc.size() == h.count(l0));
    for (std::size_t i = 0; i < h.count(l0); ++i)
      CHECK(std::abs(out.coefficients.root[0][i] - ref.dc.at(h.nodes[l0][i])) <= 1e-10);
    for (int l = l0; l < 4; ++l) {
      const auto& lb = geo.level(l);
      const auto& high = out.coefficients.high[0][static_cast<std::size_t>(l - l0)];
      for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
        double e = 0.0;
        for (int c = 0; c < lb.blocks[bi].kept(); ++c) e += std::pow(high[lb.high_offset[bi] + static_cast<std::size_t>(c)], 2);
        const auto code = h.nodes[static_cast<std::size_t>(l)][lb.blocks[bi].parent];
        CHECK(std::abs(e - ref.block_energy[static_cast<std::size_t>(l)].at(code)) <= 1e-10 * std::max(1.0, e));
      }
    }
  }
}

TEST_CASE("pipeline coefficients match the dense normal equations") {
  std::mt19937_64 rng(14);
  for (auto kind : kAll) {
    CAPTURE(to_string(kind));
    for (int t = 0; t < 4; ++t) {
      const auto cloud = testing::random_cloud(rng, 4, 64);
      const auto params = testing::random_params(rng, 4, kind);
      const std::size_t channels = kind == PredictorKind::Pbf ? 1 : 3;
      for (std::size_t c = 0; c < channels; ++c) CHECK(testing::dense_oracle_error(cloud, params, 1, c) <= 1e-10);
    }
  }
}

TEST_CASE("decoder output equals the encoder reconstruction bit for bit") {
  std::mt19937_64 rng(15);
  for (auto kind : kAll) {
    CAPTURE(to_string(kind));
    const auto cloud = rgb_to_yuv(testing::random_cloud(rng, 6, 2000));
    auto params = testing::random_params(rng, 4, kind);
    params.quantizer.step = 4.0;
    const auto enc = encode_cloud(cloud, params, 2);
    const auto dec = decode_cloud(enc.stream.bytes, cloud, params);
    REQUIRE(dec.cloud.attributes.size() == enc.output.reconstruction.size());
    CHECK(dec.cloud.attributes == enc.output.reconstruction);
    CHECK(dec.cloud.positions == cloud.positions);
  }
}

TEST_CASE("a tiny step bounds the reconstruction error") {
  std::mt19937_64 rng(16);
  for (auto kind : kAll) {
    CAPTURE(to_string(kind));
    const auto cloud = testing::random_cloud(rng, 6, 1000);
    auto params = testing::random_params(rng, 6, kind);
    const double step = 1e-3;
    params.quantizer.step = step;
    const auto enc = encode_cloud(cloud, params, 0);
    const auto dec = decode_cloud(enc.stream.bytes, cloud, params);
    // Orthonormal synthesis: the error energy equals the quantization error energy.
    const double bound = 0.5 * step * std::sqrt(static_cast<double>(cloud.size())) * (1.0 + 1e-9);
    for (std::size_t c = 0; c < 3; ++c) {
      double e2 = 0.0;
      for (std::size_t i = 0; i < cloud.size(); ++i) e2 += std::pow(dec.cloud.attribute(i, c) - cloud.attribute(i, c), 2);
      CHECK(std::sqrt(e2) <= bound);
    }
  }
}

TEST_CASE("single point codes only the root") {
  VoxelizedCloud cloud;
  cloud.depth = 5;
  cloud.positions = {{7, 19, 30}};
  cloud.attributes = {100.0, 120.0, 140.0};
  auto params = ModelParams::raht1(1);
  params.quantizer.step = 1.0;
  const auto enc = encode_cloud(cloud, params, 4);
  REQUIRE(enc.output.quantized.groups.size() == 2);
  CHECK(enc.output.quantized.groups[0][0] == std::vector<std::int64_t>{100});
  CHECK(enc.output.quantized.groups[1][0].empty());
  const auto dec = decode_cloud(enc.stream.bytes, cloud, params);
  CHECK(dec.cloud.attributes == cloud.attributes);
}

TEST_CASE("header fields override the decoder parameters") {
  std::mt19937_64 rng(17);
  const auto cloud = testing::random_cloud(rng, 5, 400);
  auto params = ModelParams::raht1(3, PredictorKind::Linear);
  params.quantizer.step = 6.0;
  params.quantizer.channel_scale = {1.0, 2.0, 3.0};
  const auto enc = encode_cloud(cloud, params, 2);
  auto other = ModelParams::raht1(3, PredictorKind::None);
  other.quantizer.step = 50.0;
  const auto dec = decode_cloud(enc.stream.bytes, cloud, other);
  CHECK(dec.header.predictor == PredictorKind::Linear);
  CHECK(dec.header.step == 6.0);
  CHECK(dec.cloud.attributes == enc.output.reconstruction);
}

TEST_CASE("geometry mismatches are rejected") {
  std::mt19937_64 rng(18);
  const auto cloud = testing::random_cloud(rng, 5, 400);
  const auto params = ModelParams::raht1(3);
  const auto enc = encode_cloud(cloud, params, 2);
  auto moved = cloud;
  moved.positions[0][0] ^= 1;
  moved = canonicalize(moved);
  auto expect_geometry = [&](const VoxelizedCloud& g) {
    try {
      decode_cloud(enc.stream.bytes, g, params);
      FAIL("expected a geometry error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Geometry);
    }
  };
  if (geometry_checksum(moved) != geometry_checksum(cloud)) expect_geometry(moved);
  auto deeper = cloud;
  deeper.depth = 6;
  expect_geometry(deeper);
}

TEST_CASE("mismatched inputs are rejected") {
  std::mt19937_64 rng(19);
  const auto cloud = testing::random_cloud(rng, 4, 50);
  const auto params = ModelParams::raht1(2);
  const auto cg = prepare_geometry(cloud, 2, PredictorKind::None);
  const auto geo = build_transform(cg, params);
  auto smaller = cloud;
  smaller.positions.pop_back();
  smaller.attributes.resize(smaller.attributes.size() - 3);
  CHECK_THROWS_AS(encode_attributes(cg, geo, params, smaller), Error);
  CHECK_THROWS_AS(encode_cloud(cloud, ModelParams::raht1(1), 2), Error);
  PipelineOptions opt;
  opt.quant = QuantMode::Identity;
  auto coef = encode_attributes(cg, geo, params, cloud, opt).coefficients;
  coef.high[1].pop_back();
  CHECK_THROWS_AS(decode_attributes(cg, geo, params, coef), Error);
}
