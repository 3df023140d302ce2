#include "mmhash/baseline_cmssh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmhash/error.hpp"

namespace mmhash {

namespace {

void check_inputs(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
                  std::span<const double> weights) {
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "CM-SSH: empty pair set");
  if (weights.size() != pairs.size())
    throw Error(ErrorCode::DimensionMismatch, "CM-SSH: one weight per pair required");
  validate_batch(pairs, data_x.rows(), data_y.rows());
}

// Candidate cut points c for the rule "bit = (value >= c)": one below all
// values, midpoints between consecutive distinct values, one above all.
std::vector<double> cut_points(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> cuts;
  cuts.reserve(values.size() + 1);
  cuts.push_back(values.front() - 1.0);
  for (std::size_t i = 1; i < values.size(); ++i) cuts.push_back(0.5 * (values[i - 1] + values[i]));
  cuts.push_back(values.back() + 1.0);
  return cuts;
}

// Up to `count` evenly spaced indices in [lo, hi].
std::vector<std::size_t> spread_indices(std::size_t lo, std::size_t hi, std::size_t count) {
  std::vector<std::size_t> out;
  const std::size_t span = hi - lo + 1;
  if (span <= count) {
    for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(lo + (k * (span - 1)) / (count - 1));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct ProjectedPair {
  double u;  // p . x_a
  double v;  // q . y_b
  double w;
  bool positive;
};

struct GridBest {
  std::size_t ia = 0;
  std::size_t ib = 0;
  double accuracy = -1.0;
};

GridBest search_grid(const std::vector<ProjectedPair>& pp, const std::vector<double>& cuts_a,
                     const std::vector<double>& cuts_b, const std::vector<std::size_t>& ia,
                     const std::vector<std::size_t>& ib) {
  const std::size_t cells = ia.size() * ib.size();
  std::vector<double> acc(cells);
  const auto n = static_cast<std::ptrdiff_t>(cells);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cell = 0; cell < n; ++cell) {
    const double ca = cuts_a[ia[cell / ib.size()]];
    const double cb = cuts_b[ib[cell % ib.size()]];
    double s = 0.0;
    for (const ProjectedPair& p : pp) {
      const bool agree = (p.u >= ca) == (p.v >= cb);
      s += agree == p.positive ? p.w : 0.0;
    }
    acc[cell] = s;
  }
  GridBest best;
  for (std::size_t cell = 0; cell < cells; ++cell)
    if (acc[cell] > best.accuracy) best = {ia[cell / ib.size()], ib[cell % ib.size()], acc[cell]};
  return best;
}

std::vector<double> normalized(std::vector<double> w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(sum > 0.0)) throw Error(ErrorCode::InvalidArgument, "CM-SSH: weights sum to zero");
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

Matrix weighted_cross_covariance(const Matrix& data_x, const Matrix& data_y,
                                 const PairBatch& pairs, std::span<const double> weights) {
  check_inputs(data_x, data_y, pairs, weights);
  Matrix c(data_x.cols(), data_y.cols());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Pair& p = pairs[i];
    add_outer(c, p.positive() ? -weights[i] : weights[i], data_x.row(p.a), data_y.row(p.b));
  }
  return c;
}

double projection_objective(const Matrix& data_x, const Matrix& data_y,
                            const PairBatch& pairs, std::span<const double> weights,
                            std::span<const double> p, std::span<const double> q) {
  check_inputs(data_x, data_y, pairs, weights);
  double s = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Pair& pr = pairs[i];
    const double term = dot(p, data_x.row(pr.a)) * dot(q, data_y.row(pr.b));
    s += pr.positive() ? -weights[i] * term : weights[i] * term;
  }
  return s;
}

double bit_accuracy(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
                    std::span<const double> weights, const BitFit& bit) {
  check_inputs(data_x, data_y, pairs, weights);
  double s = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Pair& pr = pairs[i];
    const bool sx = dot(bit.p, data_x.row(pr.a)) + bit.a >= 0.0;
    const bool sy = dot(bit.q, data_y.row(pr.b)) + bit.b >= 0.0;
    if ((sx == sy) == pr.positive()) s += weights[i];
  }
  return s;
}

BitFit fit_bit(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
               std::span<const double> weights, const CmsshOptions& options) {
  check_inputs(data_x, data_y, pairs, weights);
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error(ErrorCode::InvalidArgument, "fit_bit: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw Error(ErrorCode::InvalidArgument, "fit_bit: weights must sum to 1");
  if (options.grid < 2) throw Error(ErrorCode::InvalidArgument, "fit_bit: grid must be >= 2");

  // The top singular pair of C extremizes p^T C q; of the two sign pairings
  // keep the one with the smaller objective.
  const Svd svd = svd_small(weighted_cross_covariance(data_x, data_y, pairs, weights));
  BitFit fit;
  fit.p = Vector(data_x.cols());
  fit.q = Vector(data_y.cols());
  for (std::size_t r = 0; r < data_x.cols(); ++r) fit.p[r] = svd.u(r, 0);
  for (std::size_t r = 0; r < data_y.cols(); ++r) fit.q[r] = svd.v(r, 0);

  Vector q_flipped = fit.q;
  for (double& v : q_flipped) v = -v;
  if (projection_objective(data_x, data_y, pairs, weights, fit.p, q_flipped) <
      projection_objective(data_x, data_y, pairs, weights, fit.p, fit.q))
    fit.q = q_flipped;
  // (p, q) and (-p, -q) are equivalent; pick the one whose largest p entry
  // is positive.
  const auto largest = std::max_element(fit.p.begin(), fit.p.end(),
                                        [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*largest < 0.0) {
    for (double& v : fit.p) v = -v;
    for (double& v : fit.q) v = -v;
  }

  std::vector<ProjectedPair> pp(pairs.size());
  std::vector<double> vals_a, vals_b;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Pair& pr = pairs[i];
    pp[i] = {dot(fit.p, data_x.row(pr.a)), dot(fit.q, data_y.row(pr.b)), weights[i],
             pr.positive()};
    vals_a.push_back(pp[i].u);
    vals_b.push_back(pp[i].v);
  }
  const std::vector<double> cuts_a = cut_points(std::move(vals_a));
  const std::vector<double> cuts_b = cut_points(std::move(vals_b));

  // Coarse grid over the candidate cut points, then one refinement between
  // the neighbours of the coarse optimum.
  const auto coarse_a = spread_indices(0, cuts_a.size() - 1, options.grid);
  const auto coarse_b = spread_indices(0, cuts_b.size() - 1, options.grid);
  GridBest best = search_grid(pp, cuts_a, cuts_b, coarse_a, coarse_b);

  auto neighbourhood = [&](const std::vector<std::size_t>& coarse, std::size_t chosen) {
    const auto it = std::find(coarse.begin(), coarse.end(), chosen);
    const std::size_t k = static_cast<std::size_t>(it - coarse.begin());
    const std::size_t lo = k == 0 ? coarse.front() : coarse[k - 1];
    const std::size_t hi = k + 1 == coarse.size() ? coarse.back() : coarse[k + 1];
    return spread_indices(lo, hi, options.grid);
  };
  const GridBest fine = search_grid(pp, cuts_a, cuts_b, neighbourhood(coarse_a, best.ia),
                                    neighbourhood(coarse_b, best.ib));
  if (fine.accuracy > best.accuracy) best = fine;

  fit.a = -cuts_a[best.ia];
  fit.b = -cuts_b[best.ib];
  return fit;
}

CmsshModel fit_cmssh(const Matrix& data_x, const Matrix& data_y, const PairBatch& pairs,
                     std::size_t bits, const CmsshOptions& options) {
  if (bits < 1) throw Error(ErrorCode::InvalidArgument, "fit_cmssh: bits must be >= 1");
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "fit_cmssh: empty pair set");
  std::vector<double> init(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) init[i] = pairs[i].weight;
  std::vector<double> w = normalized(std::move(init));

  CmsshModel model{Matrix(bits, data_x.cols()), Vector(bits), Matrix(bits, data_y.cols()),
                   Vector(bits)};
  constexpr double kEpsFloor = 1e-12;
  for (std::size_t bit = 0; bit < bits; ++bit) {
    const BitFit fit = fit_bit(data_x, data_y, pairs, w, options);
    std::copy(fit.p.begin(), fit.p.end(), model.proj_x.row(bit).begin());
    std::copy(fit.q.begin(), fit.q.end(), model.proj_y.row(bit).begin());
    model.bias_x[bit] = fit.a;
    model.bias_y[bit] = fit.b;

    std::vector<unsigned char> correct(pairs.size());
    double err = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Pair& pr = pairs[i];
      const bool sx = dot(fit.p, data_x.row(pr.a)) + fit.a >= 0.0;
      const bool sy = dot(fit.q, data_y.row(pr.b)) + fit.b >= 0.0;
      correct[i] = (sx == sy) == pr.positive();
      if (!correct[i]) err += w[i];
    }
    const double eps = std::clamp(err, kEpsFloor, 1.0 - kEpsFloor);
    const double coef = 0.5 * std::log((1.0 - eps) / eps);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      w[i] *= std::exp(correct[i] ? -coef : coef);
    w = normalized(std::move(w));
  }
  return model;
}

HashCode hash(const CmsshModel& model, std::span<const double> v, Modality modality) {
  const Matrix& proj = modality == Modality::X ? model.proj_x : model.proj_y;
  const Vector& bias = modality == Modality::X ? model.bias_x : model.bias_y;
  Vector z = matvec(proj, v);
  axpy(1.0, bias.span(), z.span());
  return binarize(z.span());
}

CoupledModel to_coupled(const CmsshModel& model) {
  constexpr double kHardSign = std::numeric_limits<double>::infinity();
  std::vector<Layer> lx{{model.proj_x, model.bias_x, kHardSign}};
  std::vector<Layer> ly{{model.proj_y, model.bias_y, kHardSign}};
  return CoupledModel(EmbeddingNet(std::move(lx)), EmbeddingNet(std::move(ly)));
}

}  // namespace mmhash
