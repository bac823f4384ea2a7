#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "samif/influence.hpp"
#include "samif/ingest.hpp"
#include "samif/model.hpp"
#include "samif/samtrain.hpp"

namespace fixtures {

// Standard-normal features with uniform random labels, all rows train.
inline samif::Dataset gaussian_rows(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n * d);
  for (auto& v : x) v = nd(rng);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(rng() % classes);
  return samif::Dataset(n, d, std::move(x), std::move(y),
                        std::vector<samif::Split>(n, samif::Split::train));
}

inline samif::ParamVector gaussian_vector(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  samif::ParamVector v(size);
  for (auto& x : v) x = nd(rng);
  return v;
}

// Separable two-class blobs with 100 val and 200 test rows.
inline samif::Dataset convex_data() { return samif::make_blobs({200, 10, 2, 3.0, 1, 0.5}, 100, 200); }

inline samif::SAMConfig convex_config() {
  samif::SAMConfig c;
  c.rho = 0.05;
  c.p = 2.0;
  c.lambda = 0.1;
  c.eta = 1.0;
  c.steps = 1000;
  c.seed = 3;
  return c;
}

inline samif::NeumannConfig tight_neumann() {
  samif::NeumannConfig n;
  n.damp = 0.0;
  n.zeta = 1e-12;
  n.order = 20000;
  return n;
}

}  // namespace fixtures
