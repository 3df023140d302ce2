#include "mmhash/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "mmhash/error.hpp"
#include "mmhash/format.hpp"
#include "mmhash/rng.hpp"

namespace mmhash {

void TrainConfig::validate() const {
  if (max_epochs < 1) throw Error(ErrorCode::InvalidArgument, "max_epochs must be >= 1");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be > 0");
  if (optimizer == Optimizer::Sgd) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  }
}

void write_trace_csv(std::ostream& os, const std::vector<double>& loss_trace) {
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < loss_trace.size(); ++e)
    os << e + 1 << ',' << format_double(loss_trace[e]) << '\n';
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr int kStallEpochs = 5;

// Shared bookkeeping of the stopping rule.
class Progress {
 public:
  Progress(double tolerance, TrainReport& report) : tol_(tolerance), report_(report) {}

  // Returns true when training should stop.
  bool record(double previous, double current) {
    report_.loss_trace.push_back(current);
    report_.epochs_run = report_.loss_trace.size();
    if (current == 0.0) return report_.converged = true;
    const double rel = (previous - current) / std::max(std::abs(previous), 1e-300);
    streak_ = rel < tol_ ? streak_ + 1 : 0;
    if (streak_ >= kStallEpochs) return report_.converged = true;
    return false;
  }

 private:
  double tol_;
  TrainReport& report_;
  int streak_ = 0;
};

void require_finite_loss(double f, std::size_t epoch) {
  if (!std::isfinite(f))
    throw Error(ErrorCode::NumericalFailure,
                "non-finite loss encountered at epoch " + std::to_string(epoch));
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

struct Objective {
  CoupledModel& work;
  const Matrix& data_x;
  const Matrix& data_y;
  const PairSets& pairs;
  const LossConfig& cfg;

  double loss(std::span<const double> theta) {
    unflatten(work, theta);
    return total_loss(work, data_x, data_y, pairs, cfg);
  }
  double loss_and_gradient(std::span<const double> theta, std::vector<double>& grad,
                           const PairSets& subset) {
    unflatten(work, theta);
    ModelGradient g;
    const double f = total_loss_and_gradient(work, data_x, data_y, subset, cfg, g);
    grad = g.flatten();
    return f;
  }
};

// Polak-Ribiere+ nonlinear conjugate gradient with Armijo backtracking.
void run_cg(Objective& obj, std::vector<double>& theta, const TrainConfig& cfg,
            TrainReport& report) {
  Progress progress(cfg.tolerance, report);
  std::vector<double> g, g_new, trial(theta.size());
  double f = obj.loss_and_gradient(theta, g, obj.pairs);
  require_finite_loss(f, 0);
  if (f == 0.0 || all_zero(g)) {
    report.loss_trace = {f};
    report.epochs_run = 1;
    report.converged = true;
    return;
  }
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
  double prev_step = 0.0, prev_slope = 0.0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
      slope = -dot(g, g);
    }
    double step = epoch == 1 ? 1.0 / std::sqrt(-slope) : prev_step * prev_slope / slope;
    if (!std::isfinite(step) || step <= 0.0) step = 1.0 / std::sqrt(-slope);

    bool accepted = false;
    double f_trial = f;
    for (int k = 0; k < kMaxBacktracks; ++k) {
      for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] + step * d[i];
      f_trial = obj.loss(trial);
      if (std::isfinite(f_trial) && f_trial <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No sufficient decrease along a descent direction: stationary to
      // working precision.
      progress.record(f, f);
      report.converged = true;
      break;
    }
    theta.swap(trial);
    const double f_new = obj.loss_and_gradient(theta, g_new, obj.pairs);
    require_finite_loss(f_new, epoch);

    double gg = dot(g, g);
    double pr = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) pr += g_new[i] * (g_new[i] - g[i]);
    const double beta = std::max(0.0, pr / gg);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g_new[i] + beta * d[i];
    prev_step = step;
    prev_slope = slope;

    const double f_old = f;
    f = f_new;
    g.swap(g_new);
    if (progress.record(f_old, f) || all_zero(g)) {
      report.converged = true;
      break;
    }
  }
  unflatten(obj.work, theta);
}

struct PairRef {
  unsigned char set;  // 0 cross, 1 intra_x, 2 intra_y
  std::size_t index;
};

void run_sgd(Objective& obj, std::vector<double>& theta, const TrainConfig& cfg,
             TrainReport& report) {
  Progress progress(cfg.tolerance, report);
  const PairSets& all = obj.pairs;
  std::vector<PairRef> refs;
  refs.reserve(all.size());
  for (std::size_t i = 0; i < all.cross.size(); ++i) refs.push_back({0, i});
  for (std::size_t i = 0; i < all.intra_x.size(); ++i) refs.push_back({1, i});
  for (std::size_t i = 0; i < all.intra_y.size(); ++i) refs.push_back({2, i});

  Rng rng = make_rng(cfg.seed, "sgd");
  std::vector<double> velocity(theta.size(), 0.0), grad;
  double f = obj.loss(theta);
  require_finite_loss(f, 0);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(refs.begin(), refs.end(), rng);
    for (std::size_t start = 0; start < refs.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(refs.size(), start + cfg.batch_size);
      PairSets batch;
      for (std::size_t k = start; k < end; ++k) {
        const PairRef r = refs[k];
        if (r.set == 0)
          batch.cross.push_back(all.cross[r.index]);
        else if (r.set == 1)
          batch.intra_x.push_back(all.intra_x[r.index]);
        else
          batch.intra_y.push_back(all.intra_y[r.index]);
      }
      obj.loss_and_gradient(theta, grad, batch);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
        theta[i] += velocity[i];
      }
    }
    const double f_new = obj.loss(theta);
    require_finite_loss(f_new, epoch);
    const double f_old = f;
    f = f_new;
    if (progress.record(f_old, f)) break;
  }
  unflatten(obj.work, theta);
}

}  // namespace

TrainResult train(CoupledModel model, const Matrix& data_x, const Matrix& data_y,
                  const PairSets& pairs, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg) {
  train_cfg.validate();
  loss_cfg.validate(model.bits());
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "train: all pair sets are empty");

  TrainResult result{std::move(model), {}};
  Objective obj{result.model, data_x, data_y, pairs, loss_cfg};
  std::vector<double> theta = flatten(result.model);
  if (train_cfg.optimizer == Optimizer::ConjugateGradient)
    run_cg(obj, theta, train_cfg, result.report);
  else
    run_sgd(obj, theta, train_cfg, result.report);

  if (!train_cfg.trace_path.empty()) {
    std::ofstream os(train_cfg.trace_path);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + train_cfg.trace_path);
    write_trace_csv(os, result.report.loss_trace);
  }
  return result;
}

PairBatch sample_pairs(const std::vector<LabelSet>& labels_a,
                       const std::vector<LabelSet>& labels_b, std::size_t n_pos,
                       std::size_t n_neg, std::uint64_t seed, bool same_modality) {
  if (labels_a.empty() || labels_b.empty())
    throw Error(ErrorCode::InvalidArgument, "sample_pairs: empty label list");
  const std::size_t na = labels_a.size(), nb = labels_b.size();

  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < na && !(has_pos && has_neg); ++i)
    for (std::size_t j = 0; j < nb && !(has_pos && has_neg); ++j) {
      if (same_modality && i == j) continue;
      (labels_intersect(labels_a[i], labels_b[j]) ? has_pos : has_neg) = true;
    }
  if (n_pos > 0 && !has_pos)
    throw Error(ErrorCode::Infeasible, "sample_pairs: no positive pair exists");
  if (n_neg > 0 && !has_neg)
    throw Error(ErrorCode::Infeasible, "sample_pairs: no negative pair exists");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_a(0, na - 1), pick_b(0, nb - 1);
  PairBatch out;
  out.reserve(n_pos + n_neg);
  std::size_t got_pos = 0, got_neg = 0;
  const std::size_t cap = 1000 * (n_pos + n_neg) + 1000000;
  for (std::size_t attempt = 0; got_pos < n_pos || got_neg < n_neg; ++attempt) {
    if (attempt >= cap)
      throw Error(ErrorCode::Infeasible,
                  "sample_pairs: gave up after " + std::to_string(cap) + " draws");
    const std::size_t i = pick_a(rng);
    const std::size_t j = pick_b(rng);
    if (same_modality && i == j) continue;
    if (labels_intersect(labels_a[i], labels_b[j])) {
      if (got_pos < n_pos) {
        out.push_back({i, j, Polarity::Positive, 1.0});
        ++got_pos;
      }
    } else if (got_neg < n_neg) {
      out.push_back({i, j, Polarity::Negative, 1.0});
      ++got_neg;
    }
  }
  return out;
}

PairSets drop_boundary_pairs(const CoupledModel& model, const Matrix& data_x,
                             const Matrix& data_y, const PairSets& pairs,
                             const LossConfig& cfg, double band) {
  auto keep = [&](const EmbeddingNet& na, const EmbeddingNet& nb, const Matrix& da,
                  const Matrix& db, const PairBatch& batch, double margin) {
    validate_batch(batch, da.rows(), db.rows());
    PairBatch out;
    for (const Pair& p : batch) {
      if (!p.positive()) {
        const Vector ea = forward(na, da.row(p.a));
        const Vector eb = forward(nb, db.row(p.b));
        double sq = 0.0;
        for (std::size_t k = 0; k < ea.size(); ++k) sq += (ea[k] - eb[k]) * (ea[k] - eb[k]);
        const double dist = std::sqrt(sq);
        if (std::abs(dist - margin) <= band) continue;
        if (margin > 0.0 && dist <= band) continue;
      }
      out.push_back(p);
    }
    return out;
  };
  PairSets out;
  out.cross = keep(model.net_x, model.net_y, data_x, data_y, pairs.cross, cfg.margin_xy);
  out.intra_x = keep(model.net_x, model.net_x, data_x, data_x, pairs.intra_x, cfg.margin_x);
  out.intra_y = keep(model.net_y, model.net_y, data_y, data_y, pairs.intra_y, cfg.margin_y);
  return out;
}

double gradient_check(const CoupledModel& model, const Matrix& data_x, const Matrix& data_y,
                      const PairSets& pairs, const LossConfig& cfg, double step,
                      double boundary_band) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "gradient_check: step must be > 0");
  const PairSets kept = drop_boundary_pairs(model, data_x, data_y, pairs, cfg, boundary_band);
  const std::vector<double> analytic =
      total_gradient(model, data_x, data_y, kept, cfg).flatten();
  CoupledModel work = model;
  std::vector<double> theta = flatten(model);
  double worst = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    const double hi = saved + step;
    const double lo = saved - step;
    theta[k] = hi;
    unflatten(work, theta);
    const double up = total_loss(work, data_x, data_y, kept, cfg);
    theta[k] = lo;
    unflatten(work, theta);
    const double down = total_loss(work, data_x, data_y, kept, cfg);
    theta[k] = saved;
    const double fd = (up - down) / (hi - lo);
    worst = std::max(worst, std::abs(analytic[k] - fd) / std::max(1.0, std::abs(analytic[k])));
  }
  return worst;
}

}  // namespace mmhash
