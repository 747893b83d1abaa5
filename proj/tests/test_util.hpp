#pragma once

#include <random>

#include "bnclone/tensor.hpp"

namespace bnclone::testing {

inline Mat rand_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Fixed random projection turning any output into a scalar that depends on
// every element.
inline Var project(Graph& g, Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(y, g.constant(rand_mat(rng, y.rows(), y.cols()))));
}

}  // namespace bnclone::testing
