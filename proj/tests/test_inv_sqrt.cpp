#include <doctest.h>

#include <cmath>
#include <random>

#include "rahtpc/error.hpp"
#include "rahtpc/inv_sqrt.hpp"

using namespace rahtpc;

namespace {

SmallMatrix random_spd(std::mt19937_64& rng, int n, double floor = 0.5) {
  std::normal_distribution<double> g(0.0, 1.0);
  SmallMatrix b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = g(rng);
  SmallMatrix m = b * b.transpose();
  m += floor * SmallMatrix::Identity(n, n);
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST_CASE("identity and scalar") {
  const SmallMatrix id = SmallMatrix::Identity(3, 3);
  CHECK((inv_sqrt_exact(id) - id).cwiseAbs().maxCoeff() <= 1e-15);
  SmallMatrix four(1, 1);
  four(0, 0) = 4.0;
  CHECK(inv_sqrt_exact(four)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  const auto c = taylor_inv_sqrt_coefficients(50);
  CHECK(inv_sqrt_taylor(four, c)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("series coefficients of (1 - t)^(-1/2)") {
  const auto c = taylor_inv_sqrt_coefficients(4);
  REQUIRE(c.size() == 5);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 0.5);
  CHECK(c[2] == 0.375);
  CHECK(c[3] == 0.3125);
  CHECK(c[4] == doctest::Approx(35.0 / 128.0));
}

TEST_CASE("exact mode satisfies R M R = I on random SPD 7x7") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_spd(rng, 7);
    const SmallMatrix r = inv_sqrt_exact(m);
    CHECK((r * m * r - SmallMatrix::Identity(7, 7)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("Taylor mode converges on well-conditioned matrices") {
  std::mt19937_64 rng(12);
  const auto c = taylor_inv_sqrt_coefficients(200);
  for (int t = 0; t < 20; ++t) {
    const SmallMatrix m = random_spd(rng, 4, 4.0);
    const SmallMatrix err = inv_sqrt_taylor(m, c) - inv_sqrt_exact(m);
    CHECK(err.cwiseAbs().maxCoeff() <= 1e-6 * inv_sqrt_exact(m).cwiseAbs().maxCoeff());
  }
}

TEST_CASE("ill-conditioned and non-symmetric inputs are rejected") {
  SmallMatrix sing(2, 2);
  sing << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(check_spd(sing, "test"), Error);
  SmallMatrix asym(2, 2);
  asym << 2.0, 0.5, 0.0, 2.0;
  CHECK_THROWS_AS(check_spd(asym, "test"), Error);
  try {
    inv_sqrt_spd(sing, {}, "block 3");
    FAIL("expected a conditioning error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Conditioning);
    CHECK(std::string(e.what()).find("block 3") != std::string::npos);
  }
}

namespace {

// Central-difference directional derivative of sum(rbar .* f(M)).
template <typename F>
double fd_contract(const SmallMatrix& m, const SmallMatrix& dir, const SmallMatrix& rbar, F f) {
  const double h = 1e-6;
  return ((rbar.cwiseProduct(f(m + h * dir))).sum() - (rbar.cwiseProduct(f(m - h * dir))).sum()) / (2.0 * h);
}

}  // namespace

TEST_CASE("backward passes agree with finite differences") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n : {1, 3, 7}) {
    const SmallMatrix m = random_spd(rng, n, 1.0);
    SmallMatrix rbar(n, n), dir(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        rbar(i, j) = g(rng);
        dir(i, j) = g(rng);
      }
    dir = (0.5 * (dir + dir.transpose())).eval();
    const SmallMatrix mbar = inv_sqrt_exact_backward(m, rbar);
    const double fd = fd_contract(m, dir, rbar, [](const SmallMatrix& x) { return inv_sqrt_exact(x); });
    CHECK(mbar.cwiseProduct(dir).sum() == doctest::Approx(fd).epsilon(1e-6));

    const auto c = taylor_inv_sqrt_coefficients(12);
    std::vector<double> cbar(c.size(), 0.0);
    const SmallMatrix tbar = inv_sqrt_taylor_backward(m, c, rbar, cbar);
    const double fdt = fd_contract(m, dir, rbar, [&](const SmallMatrix& x) { return inv_sqrt_taylor(x, c); });
    CHECK(tbar.cwiseProduct(dir).sum() == doctest::Approx(fdt).epsilon(1e-6));
    for (std::size_t p = 0; p < c.size(); ++p) {
      auto up = c, down = c;
      up[p] += 1e-6;
      down[p] -= 1e-6;
      const double d = (rbar.cwiseProduct(inv_sqrt_taylor(m, up)).sum() -
                        rbar.cwiseProduct(inv_sqrt_taylor(m, down)).sum()) / 2e-6;
      CHECK(cbar[p] == doctest::Approx(d).epsilon(1e-6));
    }
  }
}
