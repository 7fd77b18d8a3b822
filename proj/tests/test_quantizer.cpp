#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rahtpc/error.hpp"
#include "rahtpc/quantizer.hpp"

using namespace rahtpc;

TEST_CASE("rounding convention") {
  CHECK(quantize(0.0, 4.0) == 0);
  CHECK(quantize(1.5 * 4.0, 4.0) == 2);
  CHECK(quantize(-1.5 * 4.0, 4.0) == -2);
  CHECK(quantize(0.5, 1.0) == 1);
  CHECK(quantize(-0.5, 1.0) == -1);
  CHECK(quantize(0.49, 1.0) == 0);
}

TEST_CASE("dequantization") {
  CHECK(dequantize(0, 3.0) == 0.0);
  CHECK(dequantize(2, 0.5) == 1.0);
  CHECK(dequantize(-3, 2.0) == -6.0);
}

TEST_CASE("reconstruction error is at most half a step") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(-1e4, 1e4), s(1e-3, 100.0);
  for (int t = 0; t < 100000; ++t) {
    const double x = c(rng), step = s(rng);
    const double err = std::abs(dequantize(quantize(x, step), step) - x);
    CHECK(err <= step / 2.0 + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x));
  }
}

TEST_CASE("vector forms match the scalar forms") {
  const std::vector<double> x{-7.2, -0.1, 0.0, 3.3, 12.5};
  const auto q = quantize(x, 2.5);
  REQUIRE(q.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(q[i] == quantize(x[i], 2.5));
  const auto d = dequantize(q, 2.5);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(d[i] == dequantize(q[i], 2.5));
}

TEST_CASE("invalid steps and values are rejected") {
  QuantizerConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.step = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.step = 1.0;
  cfg.channel_scale = {1.0, -1.0, 1.0};
  CHECK_THROWS_AS(validate(cfg), Error);
  CHECK_THROWS_AS(quantize(1.0, 0.0), Error);
  CHECK_THROWS_AS(quantize(std::numeric_limits<double>::quiet_NaN(), 1.0), Error);
  CHECK_THROWS_AS(quantize(1e300, 1e-300), Error);
}

TEST_CASE("per-channel steps") {
  QuantizerConfig cfg;
  cfg.step = 4.0;
  cfg.channel_scale = {1.0, 2.0, 0.5};
  CHECK(cfg.step_for(0) == 4.0);
  CHECK(cfg.step_for(1) == 8.0);
  CHECK(cfg.step_for(2) == 2.0);
  CHECK(cfg.step_for(5) == 4.0);
}
