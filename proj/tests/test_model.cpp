#include <doctest.h>

#include <set>

#include "fracfilt/error.hpp"
#include "fracfilt/model.hpp"
#include "test_util.hpp"

using namespace fracfilt;
using fracfilt::testing::random_matrix;
using fracfilt::testing::random_net;
using fracfilt::testing::rel_err;

namespace {

const NetDims kSmall{kNumShifts, 8, 8, 9, 5};

double max_rel(const Matrix2D& a, const Matrix2D& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double scale = 0.0;
  for (double v : b.data()) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / std::max(scale, 1e-12);
}

}  // namespace

TEST_CASE("parameter layout") {
  for (Topology t : {Topology::Shared, Topology::Scratch}) {
    const LinearConvNet net(t);
    const std::size_t trunks = t == Topology::Shared ? 1 : 15;
    CHECK(net.trunk_count() == trunks);
    CHECK(net.parameter_count() == trunks * (64 * 81 + 32 * 64) + 15 * 32 * 25);
    CHECK(net.k1(0).shape() == KernelShape{64, 1, 9, 9});
    CHECK(net.k2(0).shape() == KernelShape{32, 64, 1, 1});
    CHECK(net.k3(14).shape() == KernelShape{1, 32, 5, 5});
    CHECK(net.dims().support() == 13);

    // Ranges tile the flat vector without overlap.
    std::vector<int> hits(net.parameter_count(), 0);
    for (std::size_t tr = 0; tr < trunks; ++tr) {
      for (auto r : {net.k1_range(tr), net.k2_range(tr)}) {
        for (std::size_t i = r.begin; i < r.end; ++i) ++hits[i];
      }
    }
    for (std::size_t b = 0; b < 15; ++b) {
      const auto r = net.k3_range(b);
      for (std::size_t i = r.begin; i < r.end; ++i) ++hits[i];
    }
    CHECK(std::count(hits.begin(), hits.end(), 1) == static_cast<long>(hits.size()));
  }
}

TEST_CASE("flatten and assign round-trip") {
  const LinearConvNet a = random_net(Topology::Scratch, kSmall, 4);
  LinearConvNet b(Topology::Scratch, kSmall);
  b.assign(a.flatten());
  CHECK(a == b);
  std::vector<double> short_params(a.parameter_count() - 1);
  CHECK_THROWS_AS(b.assign(short_params), ShapeError);
}

TEST_CASE("forward output shape and errors") {
  const LinearConvNet net = random_net(Topology::Shared, kSmall, 1);
  Rng rng(2);
  CHECK(forward(net, random_matrix(20, 28, rng), 3).rows() == 8);
  CHECK(forward(net, random_matrix(20, 28, rng), 3).cols() == 16);
  CHECK_THROWS_AS(forward(net, Matrix2D(12, 13), 0), ShapeError);
}

TEST_CASE("collapse reproduces the layered forward pass") {
  for (Topology t : {Topology::Shared, Topology::Scratch}) {
    const LinearConvNet net = random_net(t, kSmall, 7);
    Rng rng(9);
    for (int trial = 0; trial < 3; ++trial) {
      const Matrix2D patch = random_matrix(20, 20, rng, 0.0, 1.0);
      for (std::size_t b = 0; b < 15; ++b) {
        CHECK(max_rel(apply_filter(collapse(net, b), patch), forward(net, patch, b)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("collapse equals one-hot probing of the forward pass") {
  const LinearConvNet net = random_net(Topology::Shared, kSmall, 12);
  for (std::size_t b : {0u, 7u, 14u}) {
    const Matrix2D f = collapse(net, b);
    REQUIRE(f.rows() == 13);
    for (std::size_t r = 0; r < 13; ++r) {
      for (std::size_t c = 0; c < 13; ++c) {
        Matrix2D probe(13, 13);
        probe(r, c) = 1.0;
        const Matrix2D out = forward(net, probe, b);
        REQUIRE(out.size() == 1);
        CHECK(rel_err(out(0, 0), f(r, c), 1e-12) <= 1e-9);
      }
    }
  }
}

TEST_CASE("identity composition collapses to a centre delta") {
  LinearConvNet net(Topology::Shared, kSmall);
  net.k1(0).at(0, 0, 4, 4) = 1.0;
  net.k2(0).at(0, 0, 0, 0) = 1.0;
  net.k3(5).at(0, 0, 2, 2) = 1.0;
  const Matrix2D f = collapse(net, 5);
  Matrix2D expected(13, 13);
  expected(6, 6) = 1.0;
  CHECK(f == expected);
  CHECK(collapse(net, 4) == Matrix2D(13, 13));

  // Moving the layer-3 tap moves the delta by the same offset.
  net.k3(5).at(0, 0, 2, 2) = 0.0;
  net.k3(5).at(0, 0, 0, 4) = 1.0;
  CHECK(collapse(net, 5)(4, 8) == 1.0);
}

TEST_CASE("master kernel sums to the collapsed filter") {
  const LinearConvNet net = random_net(Topology::Shared, kSmall, 30);
  const MasterKernel mk = master_kernel(net, 2);
  REQUIRE(mk.lambda.size() == 25);
  Matrix2D sum(13, 13);
  for (std::size_t u = 0; u < 5; ++u) {
    for (std::size_t v = 0; v < 5; ++v) {
      const Matrix2D& l = mk.at(u, v);
      REQUIRE(l.rows() == 9);
      for (std::size_t a = 0; a < 9; ++a) {
        for (std::size_t b = 0; b < 9; ++b) sum(u + a, v + b) += l(a, b);
      }
    }
  }
  CHECK(max_rel(sum, collapse(net, 2)) <= 1e-12);
}

TEST_CASE("property: scaling K3 scales the filter") {
  LinearConvNet net = random_net(Topology::Shared, kSmall, 31);
  const Matrix2D before = collapse(net, 6);
  for (double& v : net.k3(6).data()) v *= -2.5;
  CHECK(max_rel(collapse(net, 6), before * -2.5) <= 1e-12);
}

TEST_CASE("shared topology: branch weights are independent, trunk is common") {
  LinearConvNet net = random_net(Topology::Shared, kSmall, 40);
  const auto base = net.residual_filters();
  for (double& v : net.k3(3).data()) v += 0.1;
  auto after = net.residual_filters();
  for (std::size_t b = 0; b < 15; ++b) CHECK((after[b] == base[b]) == (b != 3));

  net = random_net(Topology::Shared, kSmall, 40);
  net.k1(0).at(0, 0, 4, 4) += 0.5;
  after = net.residual_filters();
  for (std::size_t b = 0; b < 15; ++b) CHECK_FALSE(after[b] == base[b]);

  const auto ranges = net.branch_param_ranges(3);
  REQUIRE(ranges.size() == 2);
  CHECK(ranges[0] == ParamRange{net.k1_range(0).begin, net.k2_range(0).end});
  CHECK(ranges[1] == net.k3_range(3));
}

TEST_CASE("scratch topology: a trunk only feeds its own branch") {
  LinearConvNet net = random_net(Topology::Scratch, kSmall, 41);
  const auto base = net.residual_filters();
  net.k1(9).at(3, 0, 1, 1) += 0.5;
  const auto after = net.residual_filters();
  for (std::size_t b = 0; b < 15; ++b) CHECK((after[b] == base[b]) == (b != 9));
  CHECK(net.branch_param_ranges(9)[0].begin == net.k1_range(9).begin);
}

TEST_CASE("backprop_linear: zero loss gradient gives zero parameter gradient") {
  const LinearConvNet net = random_net(Topology::Shared, kSmall, 50);
  Rng rng(1);
  const auto trace = forward_trace(net, random_matrix(20, 20, rng), 4);
  const auto g = backprop_linear(net, trace, Matrix2D(8, 8));
  for (double v : g) CHECK(v == 0.0);
  CHECK_THROWS_AS(backprop_linear(net, trace, Matrix2D(4, 8)), ShapeError);
}

TEST_CASE("backprop_linear matches central finite differences") {
  // loss = 0.5 * |R - T|^2, so dL/dR = R - T.
  const NetDims dims{3, 8, 8, 9, 5};
  for (Topology t : {Topology::Shared, Topology::Scratch}) {
    const LinearConvNet net = random_net(t, dims, 60);
    Rng rng(61);
    const std::size_t branch = 1;
    const Matrix2D patch = random_matrix(16, 16, rng, 0.0, 1.0);
    const Matrix2D target = random_matrix(4, 4, rng, -0.5, 0.5);
    auto loss = [&](const LinearConvNet& n) {
      const Matrix2D d = forward(n, patch, branch) - target;
      double s = 0.0;
      for (double v : d.data()) s += 0.5 * v * v;
      return s;
    };
    const auto trace = forward_trace(net, patch, branch);
    const auto grad = backprop_linear(net, trace, trace.residual - target);

    std::vector<std::size_t> idx;
    for (const auto& r : net.branch_param_ranges(branch)) {
      for (std::size_t i = r.begin; i < r.end; i += std::max<std::size_t>(1, r.size() / 50)) idx.push_back(i);
    }
    REQUIRE(idx.size() >= 100);
    const double h = 1e-4;
    const auto p0 = net.flatten();
    LinearConvNet probe = net;
    for (std::size_t i : idx) {
      auto p = p0;
      p[i] = p0[i] + h;
      probe.assign(p);
      const double up = loss(probe);
      p[i] = p0[i] - h;
      probe.assign(p);
      const double down = loss(probe);
      const double fd = (up - down) / (2 * h);
      CHECK(rel_err(grad[i], fd, 1e-6) <= 1e-4);
    }
    // Parameters outside the branch get nothing.
    const auto other = net.k3_range(0);
    for (std::size_t i = other.begin; i < other.end; ++i) CHECK(grad[i] == 0.0);
  }
}

TEST_CASE("filter-space gradient agrees with backprop_linear") {
  for (Topology t : {Topology::Shared, Topology::Scratch}) {
    const LinearConvNet net = random_net(t, kSmall, 70);
    Rng rng(71);
    const Matrix2D patch = random_matrix(20, 20, rng, 0.0, 1.0);
    const Matrix2D g = random_matrix(8, 8, rng);
    const std::size_t branch = 11;
    const auto direct = backprop_linear(net, forward_trace(net, patch, branch), g);

    std::vector<Matrix2D> fg(15);
    fg[branch] = filter_gradient(patch, g);
    std::vector<double> via(net.parameter_count(), 0.0);
    net.filter_gradient_to_params(fg, via);
    double scale = 0.0;
    for (double v : direct) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < via.size(); ++i) CHECK(std::abs(via[i] - direct[i]) <= 1e-10 * scale);
  }
}

TEST_CASE("filter_gradient is the correlation of patch and residual gradient") {
  Rng rng(80);
  const Matrix2D patch = random_matrix(17, 15, rng);
  const Matrix2D g = random_matrix(5, 3, rng);
  const Matrix2D fg = filter_gradient(patch, g);
  REQUIRE(fg.rows() == 13);
  REQUIRE(fg.cols() == 13);
  // <g, apply(F, patch)> is linear in F with gradient fg.
  const Matrix2D f = random_matrix(13, 13, rng);
  const Matrix2D out = apply_filter(f, patch);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) lhs += out.data()[i] * g.data()[i];
  for (std::size_t i = 0; i < f.size(); ++i) rhs += f.data()[i] * fg.data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("zero net gives identity prediction filters") {
  const FilterSet fs = to_prediction_filterset(LinearConvNet(Topology::Shared, kSmall));
  REQUIRE(fs.size() == 15);
  CHECK(fs.prediction_form);
  Rng rng(3);
  const Matrix2D patch = random_matrix(20, 20, rng);
  for (const auto& f : fs.filters) {
    CHECK(f(6, 6) == 1.0);
    CHECK(f.sum() == 1.0);
    CHECK(apply_filter(f, patch) == patch.crop(6, 6, 8, 8));
  }
}

TEST_CASE("prediction filters: DC response and paired SAD") {
  const LinearConvNet net = random_net(Topology::Shared, kSmall, 90, 0.1);
  const FilterSet fs = to_prediction_filterset(net);
  CHECK(fs.source_hash == weights_hash(net));
  for (std::size_t b = 0; b < 15; ++b) {
    const Matrix2D out = apply_filter(fs[b], Matrix2D(16, 16, 0.5));
    for (double v : out.data()) CHECK(v == doctest::Approx(0.5 * fs[b].sum()).epsilon(1e-12));
  }
  // Prediction via the network plus centre crop and via the filter give the same SAD.
  Rng rng(91);
  for (int i = 0; i < 100; ++i) {
    const Matrix2D patch = random_matrix(20, 20, rng, 0.0, 1.0);
    const Matrix2D target = random_matrix(8, 8, rng, 0.0, 1.0);
    const std::size_t b = static_cast<std::size_t>(i % 15);
    const Matrix2D via_net = forward(net, patch, b) + patch.crop(6, 6, 8, 8);
    const Matrix2D via_filter = apply_filter(fs[b], patch);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
      s1 += std::abs(via_net.data()[k] - target.data()[k]);
      s2 += std::abs(via_filter.data()[k] - target.data()[k]);
    }
    CHECK(rel_err(s1, s2) <= 1e-9);
  }
}

TEST_CASE("apply_filter on a plane centres the window on the collocated sample") {
  Rng rng(100);
  LumaPlane plane(32, 24);
  for (std::size_t y = 0; y < 24; ++y) {
    for (std::size_t x = 0; x < 32; ++x) plane.at(y, x) = static_cast<std::uint16_t>(rng.below(256));
  }
  const Matrix2D f = random_matrix(13, 13, rng);
  const Point origin{7, 9};
  const Matrix2D out = apply_filter(f, plane, origin, {4, 8});
  REQUIRE(out.rows() == 4);
  REQUIRE(out.cols() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      double ref = 0.0;
      for (std::size_t r = 0; r < 13; ++r) {
        for (std::size_t c = 0; c < 13; ++c) ref += f(r, c) * plane.at(origin.y + i - 6 + r, origin.x + j - 6 + c);
      }
      CHECK(out(i, j) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(apply_filter(f, plane, {5, 9}, {4, 4}), BoundsError);
  CHECK_THROWS_AS(apply_filter(f, plane, {6, 6}, {4, 21}), BoundsError);
  CHECK_NOTHROW(apply_filter(f, plane, {6, 6}, {4, 20}));
}

TEST_CASE("FilterSet validation") {
  FilterSet fs = filterset_from_residuals(std::vector<Matrix2D>(15, Matrix2D(13, 13)), "-");
  CHECK_NOTHROW(fs.validate());
  fs.filters.pop_back();
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
  fs.filters.push_back(Matrix2D(12, 12));
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
  fs.filters.back() = Matrix2D(13, 13);
  fs.filters.back()(0, 0) = std::nan("");
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
}

TEST_CASE("weights_hash") {
  LinearConvNet net = random_net(Topology::Shared, kSmall, 5);
  const std::string h = weights_hash(net);
  CHECK(h.size() == 16);
  CHECK(h == weights_hash(random_net(Topology::Shared, kSmall, 5)));
  net.k3(0).at(0, 0, 0, 0) += 1.0;
  CHECK(h != weights_hash(net));
  CHECK(weights_hash(LinearConvNet(Topology::Shared, kSmall)) !=
        weights_hash(LinearConvNet(Topology::Scratch, kSmall)));
}

TEST_CASE("one-layer net with collapsed kernels predicts identically") {
  const LinearConvNet net = random_net(Topology::Scratch, kSmall, 110);
  SingleLayerNet single;
  for (std::size_t b = 0; b < 15; ++b) single.kernel(b) = collapse(net, b);
  Rng rng(111);
  const Matrix2D patch = random_matrix(28, 28, rng, 0.0, 1.0);
  for (std::size_t b = 0; b < 15; ++b) {
    CHECK(max_rel(apply_filter(single.residual_filters()[b], patch), forward(net, patch, b)) <= 1e-9);
  }
}

TEST_CASE("SingleLayerNet parameter interface") {
  SingleLayerNet s;
  CHECK(s.parameter_count() == 15 * 169);
  Rng rng(120);
  std::vector<double> p(s.parameter_count());
  for (double& v : p) v = rng.uniform(-1, 1);
  s.assign(p);
  CHECK(s.flatten() == p);
  CHECK(s.kernel(1)(0, 0) == p[169]);
  CHECK(s.branch_param_ranges(2) == std::vector<ParamRange>{{338, 507}});

  std::vector<Matrix2D> fg(15);
  fg[2] = random_matrix(13, 13, rng);
  std::vector<double> out(s.parameter_count(), 0.0);
  s.filter_gradient_to_params(fg, out);
  for (std::size_t i = 0; i < 169; ++i) CHECK(out[338 + i] == fg[2].data()[i]);
  CHECK(out[0] == 0.0);
}
