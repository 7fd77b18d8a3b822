#include <doctest.h>

#include <cmath>
#include <random>

#include "laplace_source.hpp"
#include "rahtpc/error.hpp"
#include "rahtpc/rate_model.hpp"

using namespace rahtpc;

TEST_CASE("closed-form rate at the centre") {
  const LaplaceParams p{0.0, 1.0};
  CHECK(laplace_interval_probability(0.0, p, 2.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(laplace_bits(0.0, p, 2.0) == doctest::Approx(-std::log2(1.0 - std::exp(-1.0))).epsilon(1e-14));
  CHECK(laplace_bits(0.0, p, 2.0) == doctest::Approx(0.662).epsilon(1e-3));
  const LaplaceParams shifted{3.0, 1.0};
  CHECK(laplace_bits(3.0, shifted, 2.0) == doctest::Approx(laplace_bits(0.0, p, 2.0)));
}

TEST_CASE("large steps cost nothing") {
  const LaplaceParams p{0.0, 2.0};
  CHECK(laplace_bits(0.0, p, 1e4) <= 1e-12);
}

TEST_CASE("symmetric about the location") {
  const LaplaceParams p{1.5, 3.0};
  for (double y : {0.1, 2.0, 7.5, 40.0}) CHECK(laplace_bits(1.5 + y, p, 1.0) == doctest::Approx(laplace_bits(1.5 - y, p, 1.0)));
}

TEST_CASE("far tails keep precision and then clamp") {
  const LaplaceParams p{0.0, 1.0};
  const double b20 = laplace_bits(20.0, p, 1.0);
  const double expect = 1.0 - std::log2(std::exp(-19.5) - std::exp(-20.5));
  CHECK(b20 == doctest::Approx(expect).epsilon(1e-12));
  CHECK(laplace_bits(1e4, p, 1.0) == doctest::Approx(40.0));
  CHECK(laplace_bits_gradient(1e4, p, 1.0).d_y == 0.0);
}

TEST_CASE("cdf") {
  const LaplaceParams p{2.0, 0.5};
  CHECK(laplace_cdf(2.0, p) == 0.5);
  CHECK(laplace_cdf(3.0, p) == doctest::Approx(1.0 - 0.5 * std::exp(-2.0)));
  CHECK(laplace_cdf(1.0, p) == doctest::Approx(0.5 * std::exp(-2.0)));
}

TEST_CASE("analytic partial derivatives") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> y(-20.0, 20.0), m(-2.0, 2.0), b(0.3, 10.0), s(0.2, 16.0);
  for (int t = 0; t < 500; ++t) {
    const LaplaceParams p{m(rng), b(rng)};
    const double yy = y(rng), step = s(rng);
    if (std::abs(std::abs(yy - p.location) - step / 2.0) < 1e-3) continue;
    const auto g = laplace_bits_gradient(yy, p, step);
    const double h = 1e-6;
    auto bits = [&](double dy, double dm, double db, double ds) {
      return laplace_bits(yy + dy, {p.location + dm, p.diversity + db}, step + ds);
    };
    CHECK(g.d_y == doctest::Approx((bits(h, 0, 0, 0) - bits(-h, 0, 0, 0)) / (2 * h)).epsilon(1e-5));
    CHECK(g.d_location == doctest::Approx((bits(0, h, 0, 0) - bits(0, -h, 0, 0)) / (2 * h)).epsilon(1e-5));
    CHECK(g.d_diversity == doctest::Approx((bits(0, 0, h, 0) - bits(0, 0, -h, 0)) / (2 * h)).epsilon(1e-5));
    CHECK(g.d_step == doctest::Approx((bits(0, 0, 0, h) - bits(0, 0, 0, -h)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("group rate sums coefficient rates") {
  const LaplaceParams p{0.0, 4.0};
  const std::vector<double> c{0.0, 3.0, -7.0, 12.0};
  double total = 0.0;
  for (double v : c) total += laplace_bits(v, p, 2.0);
  CHECK(group_bits(c, p, 2.0) == doctest::Approx(total));
}

TEST_CASE("maximum-likelihood fit") {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0 / 3.0);
  std::vector<double> x(200000);
  for (auto& v : x) v = 5.0 + (rng() & 1 ? e(rng) : -e(rng));
  const auto p = fit_laplace(x);
  CHECK(p.location == doctest::Approx(5.0).epsilon(0.01));
  CHECK(p.diversity == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(laplace_bits(0.0, {0.0, 0.0}, 1.0), Error);
  CHECK_THROWS_AS(laplace_bits(0.0, {0.0, 1.0}, -1.0), Error);
}
