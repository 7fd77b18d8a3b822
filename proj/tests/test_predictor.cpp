#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dense.hpp"
#include "rahtpc/error.hpp"
#include "rahtpc/predictor.hpp"
#include "rahtpc/transform.hpp"
#include "synthetic.hpp"

using namespace rahtpc;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

VoxelizedCloud two_points(Coord3 a, Coord3 b, int depth) {
  VoxelizedCloud c;
  c.depth = depth;
  c.positions = {a, b};
  c.attributes.assign(6, 0.0);
  return canonicalize(std::move(c));
}

}  // namespace

TEST_CASE("upsampling copies the parent scaled by the kernel entry") {
  const auto h = build_hierarchy(two_points({0, 0, 0}, {1, 0, 0}, 1), 0);
  const std::vector<double> parent{6.0};
  const auto copy = upsample(h, unit_kernel(), 0, parent);
  CHECK(copy == std::vector<double>{6.0, 6.0});
  AKernel k = unit_kernel();
  k[4] = 0.5;
  const auto scaled = upsample(h, k, 0, parent);
  CHECK(scaled[0] == 6.0);
  CHECK(scaled[1] == 3.0);
}

TEST_CASE("neighbourhoods match a brute-force scan") {
  std::mt19937_64 rng(1);
  const auto cloud = testing::random_cloud(rng, 4, 300);
  const auto h = build_hierarchy(cloud, 1);
  for (int l = 2; l <= 4; ++l) {
    const auto nb = build_neighborhood(h, l);
    const auto& nodes = h.nodes[static_cast<std::size_t>(l)];
    REQUIRE(nb.size() == nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::set<std::pair<std::uint32_t, int>> expect, got;
      const Coord3 p = morton_decode(nodes[i]);
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const Coord3 q = morton_decode(nodes[j]);
        const int dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
        if (std::abs(dx) <= 1 && std::abs(dy) <= 1 && std::abs(dz) <= 1)
          expect.insert({static_cast<std::uint32_t>(j), tap_index(dx, dy, dz)});
      }
      for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) got.insert({nb.index[e], nb.tap[e]});
      CHECK(got == expect);
    }
  }
}

TEST_CASE("linear predictor special cases") {
  std::mt19937_64 rng(2);
  const auto cloud = testing::random_cloud(rng, 4, 300);
  const auto h = build_hierarchy(cloud, 1);
  const auto nb = build_neighborhood(h, 3);
  const auto u = random_vector(rng, h.count(3));
  LinearPredictorParams centre;
  centre.w.fill(0.0);
  centre.w[kCenterTap] = 1.0;
  CHECK(predict_linear(u, centre, nb) == u);

  const std::vector<double> flat(h.count(3), 17.0);
  const auto p = LinearPredictorParams::defaults();
  for (double v : predict_linear(flat, p, nb)) CHECK(v == doctest::Approx(17.0).epsilon(1e-14));
  CHECK(p.w[kCenterTap] == 1.0);
  CHECK(p.w[static_cast<std::size_t>(tap_index(1, 0, 0))] == 0.5);
  CHECK(p.w[static_cast<std::size_t>(tap_index(1, -1, 0))] == 0.25);
  CHECK(p.w[static_cast<std::size_t>(tap_index(1, 1, -1))] == 0.125);
}

TEST_CASE("uniform weights average the occupied neighbourhood") {
  std::mt19937_64 rng(3);
  const auto cloud = testing::random_cloud(rng, 4, 400);
  const auto h = build_hierarchy(cloud, 1);
  LinearPredictorParams uniform;
  uniform.w.fill(1.0);
  for (int l = 2; l <= 4; ++l) {
    const auto u = random_vector(rng, h.count(l));
    const auto got = predict_linear(u, uniform, build_neighborhood(h, l));
    const Eigen::VectorXd expect =
        testing::brute_force_linear(h, l, Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())), uniform.w);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect(static_cast<Eigen::Index>(i))).epsilon(1e-13));
  }
}

TEST_CASE("linear predictor rejects a vanishing degree") {
  const auto h = build_hierarchy(two_points({0, 0, 0}, {3, 3, 3}, 2), 0);
  LinearPredictorParams p;
  p.w.fill(0.0);
  CHECK_THROWS_AS(predict_linear(std::vector<double>{1.0, 2.0}, p, build_neighborhood(h, 2)), Error);
}

TEST_CASE("G-PCC single parent copies its value") {
  VoxelizedCloud c;
  c.depth = 1;
  c.positions = {{0, 0, 0}};
  c.attributes = {9.0, 9.0, 9.0};
  const auto h = build_hierarchy(c, 0);
  const auto st = build_gpcc_stencil(h, 0);
  REQUIRE(st.parent.size() == 1);
  CHECK(st.weight[0] == 1.0);
  CHECK(predict_gpcc_baseline(std::vector<double>{9.0}, st)[0] == 9.0);
  CHECK(st.fallbacks == 0);
}

TEST_CASE("G-PCC matches an all-pairs scan") {
  std::mt19937_64 rng(4);
  const auto cloud = testing::random_cloud(rng, 4, 250);
  const auto h = build_hierarchy(cloud, 0);
  for (int l = 0; l < 4; ++l) {
    const auto st = build_gpcc_stencil(h, l);
    const auto f = random_vector(rng, h.count(l));
    const auto got = predict_gpcc_baseline(f, st);
    const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::VectorXd want = testing::brute_force_gpcc(h, l, fv);
    for (std::size_t j = 0; j < got.size(); ++j)
      CHECK(got[j] == doctest::Approx(want(static_cast<Eigen::Index>(j))).epsilon(1e-13));
    CHECK(st.fallbacks == 0);
    const std::vector<double> flat(h.count(l), 3.0);
    for (double v : predict_gpcc_baseline(flat, st)) CHECK(v == doctest::Approx(3.0).epsilon(1e-14));
  }
}

TEST_CASE("bilateral weights") {
  const auto h = build_hierarchy(two_points({0, 0, 0}, {0, 0, 1}, 1), 0);
  const auto nb = build_neighborhood(h, 1);
  const std::vector<double> guide{10.0, 30.0};
  const auto w = bilateral_weights(guide, nb, 1.0, 20.0);
  for (std::size_t i = 0; i < nb.size(); ++i)
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
      if (nb.index[e] == i) CHECK(w[e] == 1.0);
      else CHECK(w[e] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    }

  std::mt19937_64 rng(5);
  const auto cloud = testing::random_cloud(rng, 4, 300);
  const auto hh = build_hierarchy(cloud, 1);
  const auto nb4 = build_neighborhood(hh, 4);
  const std::vector<double> flat(hh.count(4), 50.0);
  const auto noisy = random_vector(rng, hh.count(4));
  const auto wf = bilateral_weights(flat, nb4, 1.3, 5.0);
  const auto winf = bilateral_weights(noisy, nb4, 1.3, 1e12);
  for (std::size_t e = 0; e < nb4.index.size(); ++e) {
    const Coord3 k = tap_offset(nb4.tap[e]);
    const double spatial = std::exp(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) / (2.0 * 1.3 * 1.3));
    CHECK(wf[e] == doctest::Approx(spatial).epsilon(1e-15));
    CHECK(std::abs(winf[e] - spatial) <= 1e-12);
  }
}

TEST_CASE("PBF cascades") {
  std::mt19937_64 rng(6);
  const auto cloud = testing::random_cloud(rng, 4, 300);
  const auto h = build_hierarchy(cloud, 1);
  const auto nb = build_neighborhood(h, 4);
  const auto u = random_vector(rng, h.count(4));

  PbfParams id;
  id.r = {1.0, 0.0, 0.0, 0.0};
  CHECK(predict_pbf(u, id, nb) == u);

  PbfParams single;
  single.r = {1.0, 1.0};
  const auto w = bilateral_weights(u, nb, single.sigma_x, single.sigma_y);
  const auto got = predict_pbf(u, single, nb);
  for (std::size_t i = 0; i < nb.size(); ++i) {
    double num = 0.0, den = 0.0;
    for (auto e = nb.begin[i]; e < nb.begin[i + 1]; ++e) {
      num += w[e] * u[nb.index[e]];
      den += w[e];
    }
    CHECK(got[i] == doctest::Approx(num / den).epsilon(1e-13));
  }

  const std::vector<double> flat(h.count(4), 80.0);
  auto any = PbfParams::defaults(7);
  for (std::size_t k = 1; k < any.r.size(); ++k) any.r[k] = 0.3 + 0.1 * static_cast<double>(k);
  for (double v : predict_pbf(flat, any, nb)) CHECK(v == doctest::Approx(80.0).epsilon(1e-13));
}

TEST_CASE("PBF parameter validation") {
  auto p = PbfParams::defaults(4);
  CHECK_NOTHROW(validate(p));
  p.sigma_x = 0.0;
  CHECK_THROWS_AS(validate(p), Error);
  p = PbfParams::defaults(4);
  p.r.clear();
  CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("predictor names round-trip") {
  for (auto k : {PredictorKind::None, PredictorKind::Linear, PredictorKind::Gpcc, PredictorKind::Pbf})
    CHECK(parse_predictor(to_string(k)) == k);
  CHECK_THROWS_AS(parse_predictor("cubic"), Error);
}

namespace {

struct LevelFixture {
  LevelHierarchy h;
  std::vector<AKernel> kernels;
  TransformGeometry geo;
  LowpassPyramid lp;
};

LevelFixture fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto cloud = testing::random_cloud(rng, 4, 200);
  LevelFixture f;
  f.h = build_hierarchy(cloud, 1);
  std::uniform_real_distribution<double> w(0.5, 1.5);
  f.kernels.resize(3);
  for (auto& k : f.kernels)
    for (auto& v : k) v = w(rng);
  f.geo = build_transform_geometry(f.h, f.kernels, f.kernels);
  std::vector<double> leaf(f.h.num_points());
  for (std::size_t k = 0; k < leaf.size(); ++k) leaf[k] = cloud.attribute(f.h.leaf_point[k], 0);
  f.lp = analyze_lowpass(f.h, f.kernels, f.geo.gram, leaf);
  return f;
}

std::vector<double> g_star(const LevelFixture& f, int l) {
  const auto zero = std::vector<double>(f.h.count(l + 1), 0.0);
  return constrained_projection(f.geo, l, f.lp.normalized[static_cast<std::size_t>(l) + 1], zero,
                                ProjectionMode::FromPrediction);
}

}  // namespace

TEST_CASE("constrained projection limits") {
  const auto f = fixture(7);
  for (int l = 1; l < 4; ++l) {
    const auto& kernel = f.kernels[static_cast<std::size_t>(l - 1)];
    const auto u = upsample(f.h, kernel, l, f.lp.normalized[static_cast<std::size_t>(l)]);
    for (auto mode : {ProjectionMode::FromPrediction, ProjectionMode::FromLowpass})
      for (double v : constrained_projection(f.geo, l, u, u, mode)) CHECK(std::abs(v) <= 1e-10);

    const auto gs = g_star(f, l);
    const auto oracle = constrained_projection(f.geo, l, f.lp.normalized[static_cast<std::size_t>(l) + 1], u,
                                               ProjectionMode::FromLowpass);
    const auto res = residual(gs, oracle);
    for (double v : res) CHECK(std::abs(v) <= 1e-10);
  }
}

TEST_CASE("residual splits the high-pass exactly") {
  std::mt19937_64 rng(8);
  const auto a = random_vector(rng, 50, -10, 10);
  const auto b = random_vector(rng, 50, -10, 10);
  const auto r = residual(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(r[i] == a[i] - b[i]);
    CHECK(b[i] + r[i] == doctest::Approx(a[i]).epsilon(1e-15));
  }
  CHECK(residual(a, std::vector<double>(50, 0.0)) == a);
  CHECK_THROWS_AS(residual(a, std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("constrained residual never exceeds the fine-level residual") {
  std::mt19937_64 rng(9);
  const auto f = fixture(9);
  for (int l = 1; l < 4; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto u = upsample(f.h, f.kernels[li - 1], l, f.lp.normalized[li]);
    const auto pred = random_vector(rng, u.size());
    const auto gp = constrained_projection(f.geo, l, pred, u, ProjectionMode::FromLowpass);
    const auto gpp = residual(g_star(f, l), gp);
    const auto& lb = f.geo.level(l);
    for (std::size_t bi = 0; bi < lb.blocks.size(); ++bi) {
      const auto& b = lb.blocks[bi];
      SmallVector g(b.kept());
      for (int c = 0; c < b.kept(); ++c) g(c) = gpp[lb.high_offset[bi] + static_cast<std::size_t>(c)];
      const double g_norm = std::sqrt(g.dot(b.psi_gram * g));
      double d_norm = 0.0;
      for (int k = 0; k < b.size; ++k) {
        const auto j = b.first_child + static_cast<std::size_t>(k);
        d_norm += b.g(k) * std::pow(f.lp.normalized[li + 1][j] - pred[j], 2);
      }
      CHECK(g_norm <= std::sqrt(d_norm) * (1.0 + 1e-12));
    }
  }
}
