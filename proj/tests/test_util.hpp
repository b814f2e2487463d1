#pragma once

#include <random>

#include "qsd/bench.hpp"
#include "qsd/kernel.hpp"
#include "qsd/policy.hpp"

namespace qsd::fixtures {

inline SoftmaxPolicy<double> random_policy(Index n_states, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec<double> theta(n_states - 1);
  for (auto& t : theta) t = normal(gen);
  return SoftmaxPolicy<double>(theta);
}

/// Random dense strictly sub-Markovian kernel with all entries positive.
inline SubMarkovKernel<double> random_kernel(Index n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Mat<double> m(n, n);
  for (Index x = 0; x < n; ++x) {
    for (Index y = 0; y < n; ++y) m(x, y) = unif(gen);
    m.row(x) *= unif(gen) * 0.9 / m.row(x).sum();
  }
  return SubMarkovKernel<double>(m);
}

inline SubMarkovKernel<double> queue(int n, double rho = 1.25) {
  return mm1n_queue(n, [rho](int) { return rho; });
}

}  // namespace qsd::fixtures
