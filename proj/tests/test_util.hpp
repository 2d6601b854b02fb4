#pragma once

#include <cmath>
#include <cstdint>

#include "fracfilt/model.hpp"
#include "fracfilt/numerics.hpp"
#include "fracfilt/random.hpp"

namespace fracfilt::testing {

inline Matrix2D random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix2D m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline void randomize(LinearConvNet& net, Rng& rng, double scale = 0.3) {
  std::vector<double> p(net.parameter_count());
  for (double& v : p) v = round_to_f32(rng.uniform(-scale, scale));
  net.assign(p);
}

inline LinearConvNet random_net(Topology t, NetDims d, std::uint64_t seed, double scale = 0.3) {
  LinearConvNet net(t, d);
  Rng rng(seed);
  randomize(net, rng, scale);
  return net;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fracfilt::testing
