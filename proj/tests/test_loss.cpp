#include <doctest.h>

#include <cmath>
#include <random>

#include "mmhash/error.hpp"
#include "mmhash/loss.hpp"
#include "test_util.hpp"

using namespace mmhash;

namespace {

// Direct transcription of the pair losses, independent of the library kernel.
double oracle_pair(const Vector& ea, const Vector& eb, const Pair& p, double margin) {
  double sq = 0.0;
  for (std::size_t k = 0; k < ea.size(); ++k) sq += (ea[k] - eb[k]) * (ea[k] - eb[k]);
  if (p.positive()) return 0.5 * p.weight * sq;
  const double h = std::max(0.0, margin - std::sqrt(sq));
  return 0.5 * p.weight * h * h;
}

double oracle_total(const CoupledModel& m, const Matrix& x, const Matrix& y, const PairSets& ps,
                    const LossConfig& cfg) {
  double lx = 0, ly = 0, lxy = 0;
  for (const Pair& p : ps.intra_x)
    lx += oracle_pair(forward(m.net_x, x.row(p.a)), forward(m.net_x, x.row(p.b)), p, cfg.margin_x);
  for (const Pair& p : ps.intra_y)
    ly += oracle_pair(forward(m.net_y, y.row(p.a)), forward(m.net_y, y.row(p.b)), p, cfg.margin_y);
  for (const Pair& p : ps.cross)
    lxy += oracle_pair(forward(m.net_x, x.row(p.a)), forward(m.net_y, y.row(p.b)), p, cfg.margin_xy);
  return lxy + cfg.alpha_x * lx + cfg.alpha_y * ly;
}

struct Problem {
  CoupledModel model;
  Matrix x, y;
  PairSets pairs;
  LossConfig cfg;
};

Problem random_problem(std::mt19937_64& rng, bool two_layers, std::size_t n_pairs = 12) {
  std::uniform_int_distribution<std::size_t> width(1, 8);
  const std::size_t m = width(rng), dx = width(rng), dy = width(rng);
  std::vector<std::size_t> dims_x{dx, m}, dims_y{dy, m};
  if (two_layers) {
    dims_x.insert(dims_x.begin() + 1, width(rng));
    dims_y.insert(dims_y.begin() + 1, width(rng));
  }
  Problem p{CoupledModel(testutil::random_net(dims_x, rng), testutil::random_net(dims_y, rng)),
            testutil::random_matrix(6, dx, rng), testutil::random_matrix(7, dy, rng), {}, {}};
  p.pairs.intra_x = testutil::random_batch(n_pairs, 6, 6, rng);
  p.pairs.intra_y = testutil::random_batch(n_pairs, 7, 7, rng);
  p.pairs.cross = testutil::random_batch(n_pairs, 6, 7, rng);
  std::uniform_real_distribution<double> margin(0.2, 2.0 * std::sqrt(double(m))), alpha(0.0, 1.0);
  p.cfg = {margin(rng), margin(rng), margin(rng), alpha(rng), alpha(rng)};
  return p;
}

EmbeddingNet single(Matrix w, Vector b) {
  return EmbeddingNet(std::vector<Layer>{{std::move(w), std::move(b), 1.0}});
}

// Identity-like single-layer net whose embedding of row r is tanh(row r).
EmbeddingNet passthrough(std::size_t dim) { return single(Matrix::identity(dim), Vector(dim)); }

}  // namespace

TEST_CASE("intra loss examples") {
  const EmbeddingNet net = passthrough(2);
  const Matrix data{{0.3, -0.2}, {0.3, -0.2}, {0.9, 0.1}};
  CHECK(intra_loss(net, data, {{0, 1, Polarity::Positive}}, 1.0) == 0.0);
  // identical embeddings, margin 1: 1/2 * 1^2
  CHECK(intra_loss(net, data, {{0, 1, Polarity::Negative}}, 1.0) == 0.5);
  // distance beyond the margin: inactive hinge
  CHECK(intra_loss(net, data, {{0, 2, Polarity::Negative}}, 0.1) == 0.0);
  CHECK(intra_loss(net, data, {}, 1.0) == 0.0);
}

TEST_CASE("cross loss examples") {
  // Embeddings differ by (1, 0, ..., 0): first net outputs tanh(w) with w
  // chosen so the difference is exactly representable.
  const Matrix x{{0.0, 0.0, 0.0}};
  const Matrix y{{0.0, 0.0}};
  const EmbeddingNet nx = single(Matrix(3, 3), Vector{std::atanh(0.5), 0.0, 0.0});
  const EmbeddingNet ny = single(Matrix(3, 2), Vector{std::atanh(-0.5), 0.0, 0.0});
  const Vector ex = forward(nx, x.row(0)), ey = forward(ny, y.row(0));
  const double d = ex[0] - ey[0];
  CHECK(cross_loss(nx, ny, x, y, {{0, 0, Polarity::Positive}}, 3.0) == doctest::Approx(0.5 * d * d));
  CHECK(std::abs(d - 1.0) < 1e-15);

  CHECK(cross_loss(nx, nx, x, x, {{0, 0, Polarity::Positive}}, 3.0) == 0.0);
  // negative pair exactly at the margin
  CHECK(cross_loss(nx, ny, x, y, {{0, 0, Polarity::Negative}}, std::abs(d)) == 0.0);
}

TEST_CASE("invalid indices are structured errors") {
  const EmbeddingNet net = passthrough(2);
  const Matrix data{{0.3, -0.2}};
  try {
    intra_loss(net, data, {{0, 1, Polarity::Positive}}, 1.0);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexOutOfRange);
  }
  CHECK_THROWS_AS(cross_loss(net, net, data, data, {{0, 3, Polarity::Negative}}, 1.0), Error);
}

TEST_CASE("loss config validation") {
  CHECK_NOTHROW(LossConfig{}.validate(16));
  CHECK_THROWS_AS((LossConfig{-1, 1, 3, 0.1, 0.3}.validate(16)), Error);
  CHECK_THROWS_AS((LossConfig{1, 1, 3, -0.1, 0.3}.validate(16)), Error);
  CHECK_THROWS_AS((LossConfig{1, 1, 3, 0.1, 0.3}.validate(2)), Error);  // 3 > 2 sqrt(2)
  CHECK_NOTHROW((LossConfig{1, 1, 4, 0.1, 0.3}.validate(4)));           // 4 == 2 sqrt(4)
}

TEST_CASE("total loss examples") {
  std::mt19937_64 rng(1);
  Problem p = random_problem(rng, false);
  p.cfg.alpha_x = p.cfg.alpha_y = 0.0;
  CHECK(total_loss(p.model, p.x, p.y, p.pairs, p.cfg) ==
        cross_loss(p.model.net_x, p.model.net_y, p.x, p.y, p.pairs.cross, p.cfg.margin_xy));
  CHECK(total_loss(p.model, p.x, p.y, PairSets{}, p.cfg) == 0.0);

  // alpha = 1, margins 0: hinges vanish, leaving half the positive squared
  // distances over all sets.
  Problem q = random_problem(rng, true);
  q.cfg = {0, 0, 0, 1, 1};
  double expected = 0.0;
  auto add_pos = [&](const EmbeddingNet& na, const EmbeddingNet& nb, const Matrix& a,
                     const Matrix& b, const PairBatch& batch) {
    for (const Pair& pr : batch)
      if (pr.positive()) expected += oracle_pair(forward(na, a.row(pr.a)), forward(nb, b.row(pr.b)), pr, 0);
  };
  add_pos(q.model.net_x, q.model.net_x, q.x, q.x, q.pairs.intra_x);
  add_pos(q.model.net_y, q.model.net_y, q.y, q.y, q.pairs.intra_y);
  add_pos(q.model.net_x, q.model.net_y, q.x, q.y, q.pairs.cross);
  CHECK(total_loss(q.model, q.x, q.y, q.pairs, q.cfg) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("total loss matches the direct oracle and is non-negative") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Problem p = random_problem(rng, t % 2);
    const double l = total_loss(p.model, p.x, p.y, p.pairs, p.cfg);
    CHECK(l >= 0.0);
    CHECK(l == doctest::Approx(oracle_total(p.model, p.x, p.y, p.pairs, p.cfg)).epsilon(1e-12));
  }
}

TEST_CASE("batched kernels agree with the per-pair reference") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Problem p = random_problem(rng, t % 2, 100);
    CHECK(total_loss(p.model, p.x, p.y, p.pairs, p.cfg) ==
          reference::total_loss(p.model, p.x, p.y, p.pairs, p.cfg));
    CHECK(intra_loss(p.model.net_x, p.x, p.pairs.intra_x, p.cfg.margin_x) ==
          reference::intra_loss(p.model.net_x, p.x, p.pairs.intra_x, p.cfg.margin_x));
    const auto fast = total_gradient(p.model, p.x, p.y, p.pairs, p.cfg).flatten();
    const auto ref = reference::total_gradient(p.model, p.x, p.y, p.pairs, p.cfg).flatten();
    CHECK(testutil::max_rel_error(fast, ref) < 1e-12);
    ModelGradient g;
    const double l = total_loss_and_gradient(p.model, p.x, p.y, p.pairs, p.cfg, g);
    CHECK(l == total_loss(p.model, p.x, p.y, p.pairs, p.cfg));
    CHECK(g.flatten() == fast);
  }
}

TEST_CASE("total gradient matches finite differences") {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    Problem p = random_problem(rng, t % 2);
    // Keep hinge boundaries away from the finite-difference stencil.
    auto far_from_hinge = [&](const EmbeddingNet& na, const EmbeddingNet& nb, const Matrix& a,
                              const Matrix& b, PairBatch& batch, double margin) {
      std::erase_if(batch, [&](const Pair& pr) {
        if (pr.positive()) return false;
        const Vector ea = forward(na, a.row(pr.a)), eb = forward(nb, b.row(pr.b));
        double sq = 0;
        for (std::size_t k = 0; k < ea.size(); ++k) sq += (ea[k] - eb[k]) * (ea[k] - eb[k]);
        const double d = std::sqrt(sq);
        return std::abs(d - margin) < 1e-4 || d < 1e-4;
      });
    };
    far_from_hinge(p.model.net_x, p.model.net_x, p.x, p.x, p.pairs.intra_x, p.cfg.margin_x);
    far_from_hinge(p.model.net_y, p.model.net_y, p.y, p.y, p.pairs.intra_y, p.cfg.margin_y);
    far_from_hinge(p.model.net_x, p.model.net_y, p.x, p.y, p.pairs.cross, p.cfg.margin_xy);
    const auto analytic = total_gradient(p.model, p.x, p.y, p.pairs, p.cfg).flatten();
    const auto numeric = testutil::numeric_gradient(
        [&](const std::vector<double>& theta) {
          CoupledModel m = p.model;
          unflatten(m, theta);
          return oracle_total(m, p.x, p.y, p.pairs, p.cfg);
        },
        flatten(p.model));
    CHECK(testutil::max_rel_error(analytic, numeric) < 1e-5);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("gradient examples") {
  // All positives with identical embeddings: zero loss, zero gradient.
  std::mt19937_64 rng(5);
  const EmbeddingNet net = testutil::random_net({3, 4}, rng);
  const CoupledModel m(net, net);
  const Matrix x = testutil::random_matrix(4, 3, rng);
  PairSets ps;
  ps.intra_x = {{0, 0, Polarity::Positive}, {2, 2, Polarity::Positive}};
  ps.intra_y = {{1, 1, Polarity::Positive}};
  ps.cross = {{3, 3, Polarity::Positive}, {0, 0, Polarity::Positive}};
  for (double v : total_gradient(m, x, x, ps, LossConfig{}).flatten()) CHECK(v == 0.0);

  // alpha = 0: intra pairs do not touch the gradient.
  Problem p = random_problem(rng, true);
  p.cfg.alpha_x = p.cfg.alpha_y = 0.0;
  PairSets cross_only = p.pairs;
  cross_only.intra_x.clear();
  cross_only.intra_y.clear();
  CHECK(total_gradient(p.model, p.x, p.y, p.pairs, p.cfg).flatten() ==
        total_gradient(p.model, p.x, p.y, cross_only, p.cfg).flatten());
}

TEST_CASE("hinge dead zone: far negatives change nothing") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 30; ++t) {
    Problem p = random_problem(rng, t % 2);
    p.cfg.margin_xy = 0.05;
    PairSets with = p.pairs;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 7; ++j) {
        const Vector ex = forward(p.model.net_x, p.x.row(i)), ey = forward(p.model.net_y, p.y.row(j));
        double sq = 0;
        for (std::size_t k = 0; k < ex.size(); ++k) sq += (ex[k] - ey[k]) * (ex[k] - ey[k]);
        if (std::sqrt(sq) > p.cfg.margin_xy + 1e-3) with.cross.push_back({i, j, Polarity::Negative});
      }
    CHECK(total_loss(p.model, p.x, p.y, with, p.cfg) ==
          doctest::Approx(total_loss(p.model, p.x, p.y, p.pairs, p.cfg)).epsilon(1e-14));
    CHECK(testutil::max_rel_error(total_gradient(p.model, p.x, p.y, with, p.cfg).flatten(),
                                  total_gradient(p.model, p.x, p.y, p.pairs, p.cfg).flatten()) < 1e-14);
  }
}

TEST_CASE("binary limit: half squared distance is twice the Hamming distance") {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = 1 + t % 16;
    Vector a(m), b(m);
    std::size_t ham = 0;
    for (std::size_t k = 0; k < m; ++k) {
      a[k] = coin(rng) ? 1.0 : -1.0;
      b[k] = coin(rng) ? 1.0 : -1.0;
      ham += a[k] != b[k];
    }
    CHECK(oracle_pair(a, b, {0, 0, Polarity::Positive}, 0) == 2.0 * double(ham));
  }
}

TEST_CASE("pair weights scale contributions") {
  const EmbeddingNet net = passthrough(2);
  const Matrix data{{0.3, -0.2}, {-0.4, 0.5}};
  const double one = intra_loss(net, data, {{0, 1, Polarity::Positive, 1.0}}, 1.0);
  CHECK(intra_loss(net, data, {{0, 1, Polarity::Positive, 2.5}}, 1.0) == doctest::Approx(2.5 * one));
  CHECK_THROWS_AS(intra_loss(net, data, {{0, 1, Polarity::Positive, -1.0}}, 1.0), Error);
}
