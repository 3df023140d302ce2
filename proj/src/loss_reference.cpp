#include <string>

#include "mmhash/error.hpp"
#include "mmhash/loss.hpp"
#include "pair_kernel.hpp"

namespace mmhash::reference {

namespace {

struct Term {
  const EmbeddingNet& net_a;
  const EmbeddingNet& net_b;
  const Matrix& data_a;
  const Matrix& data_b;
  const PairBatch& batch;
  double margin;
  double scale;
};

// Adds scale * dL/dtheta of every pair to grad_a / grad_b (which may alias)
// and returns the unscaled loss.
double run(const Term& t, ParameterGradient* grad_a, ParameterGradient* grad_b) {
  validate_batch(t.batch, t.data_a.rows(), t.data_b.rows());
  const std::size_t m = t.net_a.output_dim();
  ForwardTrace ta, tb;
  std::vector<double> g(m), neg(m);
  double sum = 0.0;
  for (const Pair& p : t.batch) {
    forward(t.net_a, t.data_a.row(p.a), ta);
    forward(t.net_b, t.data_b.row(p.b), tb);
    sum += detail::pair_loss(ta.outputs.back().span(), tb.outputs.back().span(), p, t.margin,
                             grad_a ? std::span<double>(g) : std::span<double>());
    if (!grad_a) continue;
    for (std::size_t k = 0; k < m; ++k) {
      g[k] *= t.scale;
      neg[k] = -g[k];
    }
    accumulate_backward(t.net_a, t.data_a.row(p.a), ta, g, *grad_a);
    accumulate_backward(t.net_b, t.data_b.row(p.b), tb, neg, *grad_b);
  }
  return sum;
}

double evaluate(const CoupledModel& model, const Matrix& dx, const Matrix& dy,
                const PairSets& pairs, const LossConfig& cfg, ModelGradient* grad) {
  if (grad) {
    grad->x = ParameterGradient::zeros_like(model.net_x);
    grad->y = ParameterGradient::zeros_like(model.net_y);
  }
  ParameterGradient* gx = grad ? &grad->x : nullptr;
  ParameterGradient* gy = grad ? &grad->y : nullptr;
  const double l_xy =
      run({model.net_x, model.net_y, dx, dy, pairs.cross, cfg.margin_xy, 1.0}, gx, gy);
  double l_x = 0.0, l_y = 0.0;
  if (cfg.alpha_x != 0.0)
    l_x = run({model.net_x, model.net_x, dx, dx, pairs.intra_x, cfg.margin_x, cfg.alpha_x},
              gx, gx);
  if (cfg.alpha_y != 0.0)
    l_y = run({model.net_y, model.net_y, dy, dy, pairs.intra_y, cfg.margin_y, cfg.alpha_y},
              gy, gy);
  return l_xy + cfg.alpha_x * l_x + cfg.alpha_y * l_y;
}

}  // namespace

double intra_loss(const EmbeddingNet& net, const Matrix& data, const PairBatch& batch,
                  double margin) {
  return run({net, net, data, data, batch, margin, 1.0}, nullptr, nullptr);
}

double cross_loss(const EmbeddingNet& net_x, const EmbeddingNet& net_y,
                  const Matrix& data_x, const Matrix& data_y, const PairBatch& batch,
                  double margin) {
  return run({net_x, net_y, data_x, data_y, batch, margin, 1.0}, nullptr, nullptr);
}

double total_loss(const CoupledModel& model, const Matrix& data_x, const Matrix& data_y,
                  const PairSets& pairs, const LossConfig& cfg) {
  return evaluate(model, data_x, data_y, pairs, cfg, nullptr);
}

ModelGradient total_gradient(const CoupledModel& model, const Matrix& data_x,
                             const Matrix& data_y, const PairSets& pairs,
                             const LossConfig& cfg) {
  ModelGradient g;
  evaluate(model, data_x, data_y, pairs, cfg, &g);
  return g;
}

}  // namespace mmhash::reference
