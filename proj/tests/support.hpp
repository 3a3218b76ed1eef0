#pragma once

#include <random>
#include <set>

#include "kafnet/imts.hpp"
#include "kafnet/tensor.hpp"

namespace testing {

inline kafnet::Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  kafnet::Tensor t = kafnet::Tensor::matrix(r, c);
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

// Random sample with n variates, up to max_obs observations each drawn
// from a coarse time lattice (so variates collide on shared stamps), and
// `queries` queries per non-empty variate.
inline kafnet::ImtsSample random_sample(std::mt19937_64& rng, std::size_t n, std::size_t max_obs,
                                        std::size_t queries = 1, bool allow_empty = true) {
  std::uniform_int_distribution<std::size_t> count(allow_empty ? 0 : 1, max_obs);
  std::uniform_int_distribution<int> lattice(0, 199);
  std::normal_distribution<double> value(0.0, 1.0);
  kafnet::ImtsSample s;
  s.series.resize(n);
  s.queries.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::set<int> stamps;
    const std::size_t c = count(rng);
    while (stamps.size() < c) stamps.insert(lattice(rng));
    for (int t : stamps) s.series[v].observations.push_back({t / 200.0, value(rng)});
    for (std::size_t q = 0; q < queries; ++q) s.queries[v].push_back({1.0 + 0.1 * static_cast<double>(q + 1), value(rng)});
  }
  return s;
}

}  // namespace testing
