#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmhash/labels.hpp"
#include "mmhash/loss.hpp"
#include "mmhash/model.hpp"

namespace mmhash {

enum class Optimizer { ConjugateGradient, Sgd };

struct TrainConfig {
  Optimizer optimizer = Optimizer::ConjugateGradient;
  std::size_t max_epochs = 500;
  double learning_rate = 1e-3;  // SGD only
  double momentum = 0.9;        // SGD only
  std::size_t batch_size = 256; // SGD only
  // Stop once the relative loss decrease stays below this for 5 epochs.
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  // Reductions always run in a fixed order; the flag is recorded so runs can
  // state it.
  bool deterministic = true;
  std::string trace_path;  // epoch,loss CSV when non-empty

  void validate() const;
};

struct TrainReport {
  std::vector<double> loss_trace;  // loss after each epoch
  std::size_t epochs_run = 0;
  bool converged = false;
};

struct TrainResult {
  CoupledModel model;
  TrainReport report;
};

// Minimizes L_XY + alpha_x L_X + alpha_y L_Y over both nets.
TrainResult train(CoupledModel model, const Matrix& data_x, const Matrix& data_y,
                  const PairSets& pairs, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg);

void write_trace_csv(std::ostream& os, const std::vector<double>& loss_trace);

// Draws exactly n_pos positive and n_neg negative pairs (with replacement)
// between two label lists; a pair is positive iff the label sets intersect.
// With same_modality, pairs (i, i) are never drawn.
PairBatch sample_pairs(const std::vector<LabelSet>& labels_a,
                       const std::vector<LabelSet>& labels_b, std::size_t n_pos,
                       std::size_t n_neg, std::uint64_t seed, bool same_modality = false);

// max over parameters of |analytic - central difference| / max(1, |analytic|).
// Negative pairs whose embedding distance is within boundary_band of the
// margin (or of zero) are dropped first: the hinge is not differentiable
// there.
double gradient_check(const CoupledModel& model, const Matrix& data_x, const Matrix& data_y,
                      const PairSets& pairs, const LossConfig& cfg, double step = 1e-6,
                      double boundary_band = 1e-4);

// The pairs gradient_check keeps.
PairSets drop_boundary_pairs(const CoupledModel& model, const Matrix& data_x,
                             const Matrix& data_y, const PairSets& pairs,
                             const LossConfig& cfg, double band);

}  // namespace mmhash
