#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "mmhash/loss.hpp"

namespace mmhash::detail {

// Loss of one weighted pair given its two embeddings, and (when grad is
// non-empty) its derivative with respect to d = ea - eb.
//
//   positive:  w/2 |d|^2                    grad = w d
//   negative:  w/2 max(0, margin - |d|)^2   grad = -w (margin - |d|) d / |d|
//
// The negative branch uses subgradient 0 at |d| = 0.
inline double pair_loss(std::span<const double> ea, std::span<const double> eb,
                        const Pair& pair, double margin, std::span<double> grad) {
  const std::size_t m = ea.size();
  double sq = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double d = ea[k] - eb[k];
    sq += d * d;
  }
  const double w = pair.weight;
  if (pair.positive()) {
    if (!grad.empty())
      for (std::size_t k = 0; k < m; ++k) grad[k] = w * (ea[k] - eb[k]);
    return 0.5 * w * sq;
  }
  const double dist = std::sqrt(sq);
  if (dist >= margin) {
    if (!grad.empty())
      for (std::size_t k = 0; k < m; ++k) grad[k] = 0.0;
    return 0.0;
  }
  const double slack = margin - dist;
  if (!grad.empty()) {
    const double coef = dist > 0.0 ? -w * slack / dist : 0.0;
    for (std::size_t k = 0; k < m; ++k) grad[k] = coef * (ea[k] - eb[k]);
  }
  return 0.5 * w * slack * slack;
}

}  // namespace mmhash::detail
