#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmhash/hashing.hpp"
#include "mmhash/loss.hpp"
#include "mmhash/model.hpp"
#include "mmhash/numkernel.hpp"

namespace mmhash {

// Boosted cross-modal similarity-sensitive hashing: bit i of the X code is
// sign(p_i . x + a_i), of the Y code sign(q_i . y + b_i), with unit p_i, q_i.
struct CmsshModel {
  Matrix proj_x;  // bits x dim_x
  Vector bias_x;
  Matrix proj_y;  // bits x dim_y
  Vector bias_y;

  std::size_t bits() const noexcept { return proj_x.rows(); }
};

struct BitFit {
  Vector p;
  Vector q;
  double a = 0.0;
  double b = 0.0;
};

struct CmsshOptions {
  std::size_t grid = 32;  // threshold candidates per axis, per search stage
};

// sum_N w x y^T - sum_P w x y^T over the cross-modal pairs.
Matrix weighted_cross_covariance(const Matrix& data_x, const Matrix& data_y,
                                 const PairBatch& pairs, std::span<const double> weights);

// E{x^T p^T q y | N} - E{x^T p^T q y | P} under the pair weights. Minimizing
// it correlates the projections of positive pairs.
double projection_objective(const Matrix& data_x, const Matrix& data_y,
                            const PairBatch& pairs, std::span<const double> weights,
                            std::span<const double> p, std::span<const double> q);

// Weighted fraction of pairs whose polarity matches bit agreement.
double bit_accuracy(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
                    std::span<const double> weights, const BitFit& bit);

// One boosting round. Weights must be positive and sum to 1.
BitFit fit_bit(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
               std::span<const double> weights, const CmsshOptions& options = {});

// Fits `bits` bits sequentially with AdaBoost reweighting of the pairs,
// starting from the pairs' own weights (normalized).
CmsshModel fit_cmssh(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
                     std::size_t bits, const CmsshOptions& options = {});

HashCode hash(const CmsshModel& model, std::span<const double> v, Modality modality);

// The same hash functions as single-layer hard-sign nets, for serialization
// and for the shared evaluation path.
CoupledModel to_coupled(const CmsshModel& model);

}  // namespace mmhash
