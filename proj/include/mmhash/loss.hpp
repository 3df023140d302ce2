#pragma once

#include <cstddef>
#include <vector>

#include "mmhash/model.hpp"
#include "mmhash/numkernel.hpp"

namespace mmhash {

// Margins of the three hinge terms and weights of the two intra-modal terms.
// Defaults suit single-layer nets on 32/64-dim inputs.
struct LossConfig {
  double margin_x = 1.0;
  double margin_y = 1.0;
  double margin_xy = 3.0;
  double alpha_x = 0.1;
  double alpha_y = 0.3;

  // Throws Error{InvalidArgument}: every field must be finite and >= 0, and
  // margins may not exceed the largest distance between two points of
  // (-1, 1)^bits, 2 sqrt(bits).
  void validate(std::size_t bits) const;
};

enum class Polarity : unsigned char { Negative = 0, Positive = 1 };

struct Pair {
  std::size_t a = 0;  // row in the first modality's data
  std::size_t b = 0;  // row in the second modality's data
  Polarity polarity = Polarity::Positive;
  double weight = 1.0;

  bool positive() const noexcept { return polarity == Polarity::Positive; }
  bool operator==(const Pair&) const = default;
};

using PairBatch = std::vector<Pair>;

// The six training sets: X-X, Y-Y and X-Y pairs, each holding both
// positives and negatives.
struct PairSets {
  PairBatch intra_x;
  PairBatch intra_y;
  PairBatch cross;

  bool empty() const noexcept {
    return intra_x.empty() && intra_y.empty() && cross.empty();
  }
  std::size_t size() const noexcept {
    return intra_x.size() + intra_y.size() + cross.size();
  }
  bool operator==(const PairSets&) const = default;
};

std::size_t count_positive(const PairBatch& batch);

// Throws Error{IndexOutOfRange} naming the offending pair.
void validate_batch(const PairBatch& batch, std::size_t rows_a, std::size_t rows_b);

double intra_loss(const EmbeddingNet& net, const Matrix& data, const PairBatch& batch,
                  double margin);
double cross_loss(const EmbeddingNet& net_x, const EmbeddingNet& net_y,
                  const Matrix& data_x, const Matrix& data_y, const PairBatch& batch,
                  double margin);

// L_XY + alpha_x L_X + alpha_y L_Y. Terms with zero weight are not evaluated.
double total_loss(const CoupledModel& model, const Matrix& data_x, const Matrix& data_y,
                  const PairSets& pairs, const LossConfig& cfg);

struct ModelGradient {
  ParameterGradient x;
  ParameterGradient y;

  // Same order as flatten(const CoupledModel&).
  std::vector<double> flatten() const;
};

ModelGradient total_gradient(const CoupledModel& model, const Matrix& data_x,
                             const Matrix& data_y, const PairSets& pairs,
                             const LossConfig& cfg);

// One pass computing both; returns the loss.
double total_loss_and_gradient(const CoupledModel& model, const Matrix& data_x,
                               const Matrix& data_y, const PairSets& pairs,
                               const LossConfig& cfg, ModelGradient& grad);

// Serial per-pair implementation: forward and backward through both ends of
// every pair independently. Kept as the reference the batched kernels are
// tested and benchmarked against.
namespace reference {

double intra_loss(const EmbeddingNet& net, const Matrix& data, const PairBatch& batch,
                  double margin);
double cross_loss(const EmbeddingNet& net_x, const EmbeddingNet& net_y,
                  const Matrix& data_x, const Matrix& data_y, const PairBatch& batch,
                  double margin);
double total_loss(const CoupledModel& model, const Matrix& data_x, const Matrix& data_y,
                  const PairSets& pairs, const LossConfig& cfg);
ModelGradient total_gradient(const CoupledModel& model, const Matrix& data_x,
                             const Matrix& data_y, const PairSets& pairs,
                             const LossConfig& cfg);

}  // namespace reference

}  // namespace mmhash
