#include "mmhash/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmhash/error.hpp"
#include "pair_kernel.hpp"

namespace mmhash {

void LossConfig::validate(std::size_t bits) const {
  const double bound = 2.0 * std::sqrt(static_cast<double>(bits));
  const struct {
    const char* name;
    double value;
    bool is_margin;
  } fields[] = {{"margin_x", margin_x, true},   {"margin_y", margin_y, true},
                {"margin_xy", margin_xy, true}, {"alpha_x", alpha_x, false},
                {"alpha_y", alpha_y, false}};
  for (const auto& f : fields) {
    if (!std::isfinite(f.value) || f.value < 0.0)
      throw Error(ErrorCode::InvalidArgument,
                  std::string(f.name) + " must be finite and >= 0");
    if (f.is_margin && f.value > bound)
      throw Error(ErrorCode::InvalidArgument,
                  std::string(f.name) + " = " + std::to_string(f.value) +
                      " exceeds the maximum code distance 2*sqrt(" +
                      std::to_string(bits) + ")");
  }
}

std::size_t count_positive(const PairBatch& batch) {
  return static_cast<std::size_t>(
      std::count_if(batch.begin(), batch.end(), [](const Pair& p) { return p.positive(); }));
}

void validate_batch(const PairBatch& batch, std::size_t rows_a, std::size_t rows_b) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Pair& p = batch[i];
    if (p.a >= rows_a || p.b >= rows_b)
      throw Error(ErrorCode::IndexOutOfRange,
                  "pair " + std::to_string(i) + " (" + std::to_string(p.a) + ", " +
                      std::to_string(p.b) + ") outside " + std::to_string(rows_a) +
                      " x " + std::to_string(rows_b) + " samples");
    if (!std::isfinite(p.weight) || p.weight < 0.0)
      throw Error(ErrorCode::InvalidArgument,
                  "pair " + std::to_string(i) + " has invalid weight");
  }
}

std::vector<double> ModelGradient::flatten() const {
  std::vector<double> out = x.flatten();
  const std::vector<double> gy = y.flatten();
  out.insert(out.end(), gy.begin(), gy.end());
  return out;
}

namespace {

constexpr std::size_t kSampleBlock = 64;

// Layer activations of the touched rows of one modality's data.
struct Embedded {
  std::vector<Matrix> outputs;  // per layer: rows x width
  std::vector<unsigned char> touched;

  std::span<const double> code(std::size_t i) const { return outputs.back().row(i); }
};

void check_data(const EmbeddingNet& net, const Matrix& data, const char* which) {
  if (net.input_dim() != data.cols())
    throw Error(ErrorCode::DimensionMismatch,
                std::string(which) + ": net expects " + std::to_string(net.input_dim()) +
                    " features, data has " + std::to_string(data.cols()));
}

Embedded embed(const EmbeddingNet& net, const Matrix& data,
               std::vector<unsigned char> touched) {
  Embedded e;
  e.touched = std::move(touched);
  for (const auto& layer : net.layers()) e.outputs.emplace_back(data.rows(), layer.out_dim());
  const auto n = static_cast<std::ptrdiff_t>(data.rows());
  const std::size_t depth = net.num_layers();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!e.touched[i]) continue;
    std::span<double> outs[2];
    std::vector<std::span<double>> deep;
    std::span<const std::span<double>> view;
    if (depth <= 2) {
      for (std::size_t l = 0; l < depth; ++l) outs[l] = e.outputs[l].row(i);
      view = std::span<const std::span<double>>(outs, depth);
    } else {
      for (std::size_t l = 0; l < depth; ++l) deep.push_back(e.outputs[l].row(i));
      view = deep;
    }
    forward_into(net, data.row(i), view);
  }
  return e;
}

void mark(std::vector<unsigned char>& touched, const PairBatch& batch, bool first,
          bool second) {
  for (const Pair& p : batch) {
    if (first) touched[p.a] = 1;
    if (second) touched[p.b] = 1;
  }
}

// Sums the pair losses of a batch (in pair order). When upstream matrices are
// given, scale * dL/d(ea) is added to up_a and scale * dL/d(eb) to up_b.
double accumulate_pairs(const Embedded& ea, const Embedded& eb, const PairBatch& batch,
                        double margin, double scale, Matrix* up_a, Matrix* up_b) {
  const std::size_t n = batch.size();
  if (n == 0) return 0.0;
  const std::size_t m = ea.outputs.back().cols();
  std::vector<double> losses(n);
  std::vector<double> grads(up_a ? n * m : 0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const Pair& pair = batch[p];
    std::span<double> g;
    if (up_a) g = std::span<double>(grads.data() + p * m, m);
    losses[p] = detail::pair_loss(ea.code(pair.a), eb.code(pair.b), pair, margin, g);
  }
  double sum = 0.0;
  for (double l : losses) sum += l;
  if (up_a) {
    for (std::size_t p = 0; p < n; ++p) {
      const double* g = grads.data() + p * m;
      auto ra = up_a->row(batch[p].a);
      for (std::size_t k = 0; k < m; ++k) ra[k] += scale * g[k];
      auto rb = up_b->row(batch[p].b);
      for (std::size_t k = 0; k < m; ++k) rb[k] -= scale * g[k];
    }
  }
  return sum;
}

// Backpropagates per-sample upstream gradients. Samples are grouped into
// fixed-size blocks whose partial sums are reduced in block order, so the
// result does not depend on the thread count.
ParameterGradient backprop(const EmbeddingNet& net, const Matrix& data, const Embedded& e,
                           const Matrix& upstream) {
  const std::size_t n = data.rows();
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  std::vector<ParameterGradient> partial(blocks);
  const auto nblocks = static_cast<std::ptrdiff_t>(blocks);
  const std::size_t depth = net.num_layers();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < nblocks; ++blk) {
    ParameterGradient g = ParameterGradient::zeros_like(net);
    std::vector<std::span<const double>> outs(depth);
    const std::size_t begin = blk * kSampleBlock;
    const std::size_t end = std::min(n, begin + kSampleBlock);
    for (std::size_t i = begin; i < end; ++i) {
      if (!e.touched[i]) continue;
      const auto up = upstream.row(i);
      if (std::all_of(up.begin(), up.end(), [](double v) { return v == 0.0; })) continue;
      for (std::size_t l = 0; l < depth; ++l) outs[l] = e.outputs[l].row(i);
      accumulate_backward(net, data.row(i), outs, up, g);
    }
    partial[blk] = std::move(g);
  }
  ParameterGradient total = ParameterGradient::zeros_like(net);
  for (const auto& p : partial) total.add(p);
  return total;
}

double evaluate(const CoupledModel& model, const Matrix& data_x, const Matrix& data_y,
                const PairSets& pairs, const LossConfig& cfg, ModelGradient* grad) {
  check_data(model.net_x, data_x, "net_x");
  check_data(model.net_y, data_y, "net_y");
  if (model.net_x.output_dim() != model.net_y.output_dim())
    throw Error(ErrorCode::DimensionMismatch, "nets disagree on code length");
  const std::size_t nx = data_x.rows();
  const std::size_t ny = data_y.rows();
  validate_batch(pairs.cross, nx, ny);
  validate_batch(pairs.intra_x, nx, nx);
  validate_batch(pairs.intra_y, ny, ny);

  const bool use_x = cfg.alpha_x != 0.0 && !pairs.intra_x.empty();
  const bool use_y = cfg.alpha_y != 0.0 && !pairs.intra_y.empty();

  std::vector<unsigned char> tx(nx, 0), ty(ny, 0);
  mark(tx, pairs.cross, true, false);
  mark(ty, pairs.cross, false, true);
  if (use_x) mark(tx, pairs.intra_x, true, true);
  if (use_y) mark(ty, pairs.intra_y, true, true);

  const Embedded ex = embed(model.net_x, data_x, std::move(tx));
  const Embedded ey = embed(model.net_y, data_y, std::move(ty));

  const std::size_t m = model.bits();
  Matrix up_x, up_y;
  if (grad) {
    up_x = Matrix(nx, m);
    up_y = Matrix(ny, m);
  }
  Matrix* gx = grad ? &up_x : nullptr;
  Matrix* gy = grad ? &up_y : nullptr;

  const double l_xy = accumulate_pairs(ex, ey, pairs.cross, cfg.margin_xy, 1.0, gx, gy);
  const double l_x =
      use_x ? accumulate_pairs(ex, ex, pairs.intra_x, cfg.margin_x, cfg.alpha_x, gx, gx) : 0.0;
  const double l_y =
      use_y ? accumulate_pairs(ey, ey, pairs.intra_y, cfg.margin_y, cfg.alpha_y, gy, gy) : 0.0;

  if (grad) {
    grad->x = backprop(model.net_x, data_x, ex, up_x);
    grad->y = backprop(model.net_y, data_y, ey, up_y);
  }
  return l_xy + cfg.alpha_x * l_x + cfg.alpha_y * l_y;
}

}  // namespace

double intra_loss(const EmbeddingNet& net, const Matrix& data, const PairBatch& batch,
                  double margin) {
  check_data(net, data, "intra_loss");
  validate_batch(batch, data.rows(), data.rows());
  std::vector<unsigned char> touched(data.rows(), 0);
  mark(touched, batch, true, true);
  const Embedded e = embed(net, data, std::move(touched));
  return accumulate_pairs(e, e, batch, margin, 1.0, nullptr, nullptr);
}

double cross_loss(const EmbeddingNet& net_x, const EmbeddingNet& net_y,
                  const Matrix& data_x, const Matrix& data_y, const PairBatch& batch,
                  double margin) {
  check_data(net_x, data_x, "cross_loss");
  check_data(net_y, data_y, "cross_loss");
  if (net_x.output_dim() != net_y.output_dim())
    throw Error(ErrorCode::DimensionMismatch, "cross_loss: code lengths differ");
  validate_batch(batch, data_x.rows(), data_y.rows());
  std::vector<unsigned char> tx(data_x.rows(), 0), ty(data_y.rows(), 0);
  mark(tx, batch, true, false);
  mark(ty, batch, false, true);
  const Embedded ex = embed(net_x, data_x, std::move(tx));
  const Embedded ey = embed(net_y, data_y, std::move(ty));
  return accumulate_pairs(ex, ey, batch, margin, 1.0, nullptr, nullptr);
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

double total_loss_and_gradient(const CoupledModel& model, const Matrix& data_x,
                               const Matrix& data_y, const PairSets& pairs,
                               const LossConfig& cfg, ModelGradient& grad) {
  return evaluate(model, data_x, data_y, pairs, cfg, &grad);
}

}  // namespace mmhash
