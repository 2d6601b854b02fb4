#include <doctest.h>

#include <cmath>

#include "fracfilt/error.hpp"
#include "fracfilt/numerics.hpp"
#include "fracfilt/random.hpp"
#include "test_util.hpp"

using namespace fracfilt;
using fracfilt::testing::random_matrix;

namespace {

KernelStack random_kernels(KernelShape shape, Rng& rng) {
  KernelStack k(shape);
  for (double& v : k.data()) v = rng.uniform(-1.0, 1.0);
  return k;
}

}  // namespace

TEST_CASE("Matrix2D basics") {
  Matrix2D m(2, 3, 1.5);
  CHECK(m.size() == 6);
  CHECK(m.sum() == doctest::Approx(9.0));
  m(1, 2) = -4.0;
  const Matrix2D c = m.crop(1, 1, 1, 2);
  CHECK(c.rows() == 1);
  CHECK(c(0, 1) == -4.0);
  CHECK_THROWS_AS(Matrix2D(2, 2, std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(m += Matrix2D(3, 2), ShapeError);
  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("conv2d_valid on constant input") {
  const Matrix2D in(13, 13, 1.0);
  KernelStack k({1, 1, 9, 9});
  for (double& v : k.data()) v = 1.0;
  const auto out = conv2d_valid(in, k);
  REQUIRE(out.size() == 1);
  CHECK(out[0].rows() == 5);
  CHECK(out[0].cols() == 5);
  for (double v : out[0].data()) CHECK(v == 81.0);
}

TEST_CASE("conv2d_valid with a centre delta crops the input") {
  Rng rng(3);
  const Matrix2D in = random_matrix(13, 13, rng);
  KernelStack k({1, 1, 9, 9});
  k.at(0, 0, 4, 4) = 1.0;
  const auto out = conv2d_valid(in, k);
  CHECK(out[0] == in.crop(4, 4, 5, 5));
}

TEST_CASE("conv2d_valid matches a nested-loop oracle") {
  Rng rng(11);
  const Matrix2D in = random_matrix(13, 13, rng);
  const KernelStack k = random_kernels({1, 1, 9, 9}, rng);
  const auto out = conv2d_valid(in, k);
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 5; ++x) {
      double ref = 0.0;
      for (std::size_t a = 0; a < 9; ++a) {
        for (std::size_t b = 0; b < 9; ++b) ref += k.at(0, 0, a, b) * in(y + a, x + b);
      }
      CHECK(out[0](y, x) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d_valid sums over input channels") {
  Rng rng(5);
  std::vector<Matrix2D> in{random_matrix(6, 7, rng), random_matrix(6, 7, rng)};
  const KernelStack k = random_kernels({3, 2, 3, 3}, rng);
  const auto out = conv2d_valid(in, k);
  REQUIRE(out.size() == 3);
  CHECK(out[2].rows() == 4);
  CHECK(out[2].cols() == 5);
  double ref = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) ref += k.at(2, d, a, b) * in[d](1 + a, 2 + b);
    }
  }
  CHECK(out[2](1, 2) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("conv2d_valid rejects mismatched shapes") {
  KernelStack k({1, 1, 9, 9});
  CHECK_THROWS_AS(conv2d_valid(Matrix2D(8, 13), k), ShapeError);
  KernelStack k2({1, 2, 3, 3});
  CHECK_THROWS_AS(conv2d_valid(Matrix2D(5, 5), k2), ShapeError);
  std::vector<Matrix2D> uneven{Matrix2D(5, 5), Matrix2D(5, 6)};
  CHECK_THROWS_AS(conv2d_valid(uneven, k2), ShapeError);
}

TEST_CASE("property: conv2d_valid is linear") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix2D x1 = random_matrix(13, 13, rng);
    const Matrix2D x2 = random_matrix(13, 13, rng);
    const double a = rng.uniform(-3, 3);
    const double b = rng.uniform(-3, 3);
    const KernelStack k = random_kernels({2, 1, 9, 9}, rng);
    const auto lhs = conv2d_valid(x1 * a + x2 * b, k);
    const auto r1 = conv2d_valid(x1, k);
    const auto r2 = conv2d_valid(x2, k);
    for (std::size_t c = 0; c < 2; ++c) {
      const Matrix2D rhs = r1[c] * a + r2[c] * b;
      for (std::size_t i = 0; i < rhs.size(); ++i) {
        CHECK(fracfilt::testing::rel_err(lhs[c].data()[i], rhs.data()[i], 1e-9) <= 1e-9);
      }
    }
  }
}

TEST_CASE("property: 9x9 -> 1x1 -> 5x5 stack maps (H+12)x(W+12) to HxW") {
  for (std::size_t h : {4u, 8u, 13u}) {
    for (std::size_t w : {4u, 16u}) {
      const auto l1 = conv2d_valid(Matrix2D(h + 12, w + 12, 1.0), KernelStack({4, 1, 9, 9}));
      const auto l2 = conv2d_valid(l1, KernelStack({3, 4, 1, 1}));
      const auto l3 = conv2d_valid(l2, KernelStack({1, 3, 5, 5}));
      CHECK(l3[0].rows() == h);
      CHECK(l3[0].cols() == w);
    }
  }
}

TEST_CASE("clip_global_norm") {
  SUBCASE("below the limit is the identity") {
    std::vector<double> g{3.0, 0.0};
    CHECK(clip_global_norm(g, 5.0) == doctest::Approx(3.0));
    CHECK(g == std::vector<double>{3.0, 0.0});
  }
  SUBCASE("norm 10 against 5 halves every entry") {
    std::vector<double> g{6.0, -8.0};
    CHECK(clip_global_norm(g, 5.0) == doctest::Approx(10.0));
    CHECK(g[0] == doctest::Approx(3.0));
    CHECK(g[1] == doctest::Approx(-4.0));
  }
  SUBCASE("random vectors end at or below the limit and clipping is idempotent") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> g(200);
      for (double& v : g) v = rng.uniform(-2, 2) * (t + 1);
      clip_global_norm(g, 5.0);
      CHECK(global_norm(g) <= 5.0 + 1e-9);
      const std::vector<double> once = g;
      clip_global_norm(g, 5.0);
      CHECK(g == once);
    }
  }
  SUBCASE("errors") {
    std::vector<double> g{1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(clip_global_norm(g, 5.0), NumericError);
    std::vector<double> ok{1.0};
    CHECK_THROWS_AS(clip_global_norm(ok, 0.0), std::invalid_argument);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradients leave parameters exactly unchanged") {
    std::vector<double> p{0.5, -0.25};
    const std::vector<double> g{0.0, 0.0};
    AdamState s(2, {});
    adam_step(p, g, s);
    CHECK(p == std::vector<double>{0.5, -0.25});
    CHECK(s.step == 1);
  }
  SUBCASE("one step with g = 1 matches the hand computation") {
    // m = 0.1, v = 0.001; bias-corrected both are 1, so the step is lr / (1 + eps).
    std::vector<double> p{1.0};
    const std::vector<double> g{1.0};
    AdamState s(1, {1e-4, 0.9, 0.999, 1e-8});
    adam_step(p, g, s);
    CHECK(p[0] == doctest::Approx(1.0 - 1e-4 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(s.first_moment[0] == doctest::Approx(0.1));
    CHECK(s.second_moment[0] == doctest::Approx(0.001));
  }
  SUBCASE("repeated steps move against the gradient sign") {
    std::vector<double> p{0.0, 0.0};
    const std::vector<double> g{2.0, -0.5};
    AdamState s(2, {});
    adam_step(p, g, s);
    const std::vector<double> after1 = p;
    adam_step(p, g, s);
    CHECK(after1[0] < 0.0);
    CHECK(after1[1] > 0.0);
    CHECK(p[0] < after1[0]);
    CHECK(p[1] > after1[1]);
    CHECK(s.step == 2);
  }
  SUBCASE("masked ranges touch nothing else") {
    std::vector<double> p{1.0, 1.0, 1.0, 1.0};
    const std::vector<double> g{1.0, 1.0, 1.0, 1.0};
    AdamState s(4, {});
    const std::vector<ParamRange> active{{1, 3}};
    adam_step(p, g, s, active);
    CHECK(p[0] == 1.0);
    CHECK(p[3] == 1.0);
    CHECK(p[1] < 1.0);
    CHECK(s.updates == std::vector<std::uint64_t>{0, 1, 1, 0});
    CHECK(s.first_moment[0] == 0.0);
  }
  SUBCASE("shape mismatch") {
    std::vector<double> p{1.0, 2.0};
    const std::vector<double> g{1.0};
    AdamState s(2, {});
    CHECK_THROWS_AS(adam_step(p, g, s), ShapeError);
    const std::vector<ParamRange> bad{{1, 5}};
    const std::vector<double> g2{1.0, 1.0};
    CHECK_THROWS_AS(adam_step(p, g2, s, bad), ShapeError);
  }
}

TEST_CASE("Rng is reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
}
