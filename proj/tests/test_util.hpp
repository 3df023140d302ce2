#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mmhash/loss.hpp"
#include "mmhash/model.hpp"
#include "mmhash/numkernel.hpp"

namespace testutil {

using namespace mmhash;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.span()) v = n(rng);
  return m;
}

inline Vector random_vector(std::size_t len, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(len);
  for (double& x : v) x = n(rng);
  return v;
}

// Random net with dims (in, [hidden], out) and non-zero biases.
inline EmbeddingNet random_net(const std::vector<std::size_t>& dims, std::mt19937_64& rng,
                               double beta = 1.0) {
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    layers.push_back({random_matrix(dims[l + 1], dims[l], rng, 0.7),
                      random_vector(dims[l + 1], rng, 0.3), beta});
  return EmbeddingNet(std::move(layers));
}

inline PairBatch random_batch(std::size_t n, std::size_t rows_a, std::size_t rows_b,
                              std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> ia(0, rows_a - 1), ib(0, rows_b - 1);
  std::bernoulli_distribution pos(0.5);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  PairBatch b;
  for (std::size_t i = 0; i < n; ++i)
    b.push_back({ia(rng), ib(rng), pos(rng) ? Polarity::Positive : Polarity::Negative, w(rng)});
  return b;
}

// Central differences of f over every coordinate of theta.
template <typename F>
std::vector<double> numeric_gradient(F&& f, std::vector<double> theta, double step = 1e-6) {
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double hi_x = theta[i];
    const double hi = f(theta);
    theta[i] = orig - step;
    const double lo_x = theta[i];
    const double lo = f(theta);
    theta[i] = orig;
    g[i] = (hi - lo) / (hi_x - lo_x);
  }
  return g;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    e = std::max(e, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
  return e;
}

}  // namespace testutil
