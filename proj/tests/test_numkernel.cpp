#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mmhash/error.hpp"
#include "mmhash/numkernel.hpp"
#include "test_util.hpp"

using namespace mmhash;

namespace {

Matrix reconstruct(const Svd& s) {
  Matrix us = s.u;
  for (std::size_t r = 0; r < us.rows(); ++r)
    for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= s.s[c];
  return matmul(us, transpose(s.v));
}

double orthonormality_error(const Matrix& q) {
  const Matrix g = matmul(transpose(q), q);
  double e = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) e = std::max(e, std::abs(g(i, j) - (i == j)));
  return e;
}

void check_svd(const Matrix& m) {
  const Svd s = svd_small(m);
  const std::size_t k = std::min(m.rows(), m.cols());
  REQUIRE(s.u.rows() == m.rows());
  REQUIRE(s.u.cols() == k);
  REQUIRE(s.v.rows() == m.cols());
  REQUIRE(s.v.cols() == k);
  for (std::size_t i = 0; i < k; ++i) {
    CHECK(s.s[i] >= 0.0);
    if (i > 0) CHECK(s.s[i] <= s.s[i - 1]);
  }
  CHECK(orthonormality_error(s.u) < 1e-10);
  CHECK(orthonormality_error(s.v) < 1e-10);
  Matrix diff = reconstruct(s);
  for (std::size_t i = 0; i < diff.size(); ++i) diff.span()[i] -= m.span()[i];
  CHECK(frobenius_norm(diff) < 1e-9 * std::max(1.0, frobenius_norm(m)));
}

}  // namespace

TEST_CASE("matvec examples") {
  CHECK(matvec(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matvec(Matrix(2, 3), Vector{4, -1, 7}) == Vector{0, 0});
  CHECK(matvec(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}) == Vector{3, 7});
  CHECK(matvec_transposed(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}) == Vector{4, 6});
}

TEST_CASE("dimension mismatch is a structured error") {
  try {
    matvec(Matrix(2, 3), Vector{1, 2});
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  CHECK_THROWS_AS(dot(Vector{1}, Vector{1, 2}), Error);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), Error);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), Error);
}

TEST_CASE("non-finite entries are rejected at construction") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Vector({1.0, nan}), Error);
  CHECK_THROWS_AS(Vector(std::vector<double>{inf}), Error);
  CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{0.0, nan}), Error);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), Error);
  CHECK_FALSE(all_finite(std::vector<double>{1.0, inf}));
}

TEST_CASE("matvec is linear") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3, 3);
  for (int t = 0; t < 200; ++t) {
    const Matrix m = testutil::random_matrix(1 + t % 7, 1 + t % 5, rng);
    const Vector u = testutil::random_vector(m.cols(), rng);
    const Vector v = testutil::random_vector(m.cols(), rng);
    const double a = coef(rng), b = coef(rng);
    Vector combo(m.cols());
    axpy(a, u, combo.span());
    axpy(b, v, combo.span());
    const Vector lhs = matvec(m, combo);
    const Vector mu = matvec(m, u), mv = matvec(m, v);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const double rhs = a * mu[i] + b * mv[i];
      CHECK(std::abs(lhs[i] - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST_CASE("add_outer and transpose") {
  Matrix m(2, 3);
  add_outer(m, 2.0, Vector{1, -1}, Vector{1, 2, 3});
  CHECK(m == Matrix{{2, 4, 6}, {-2, -4, -6}});
  CHECK(transpose(m) == Matrix{{2, -2}, {4, -4}, {6, -6}});
  CHECK(frobenius_norm(Matrix{{3, 4}}) == 5.0);
}

TEST_CASE("svd of a diagonal matrix") {
  const Svd s = svd_small(Matrix{{3, 0}, {0, 1}});
  CHECK(s.s == Vector{3, 1});
  CHECK(std::abs(std::abs(s.u(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(s.u(1, 1)) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(s.v(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(s.v(1, 1)) - 1.0) < 1e-12);
}

TEST_CASE("svd of a rank-1 matrix") {
  const Svd s = svd_small(Matrix{{1, 0}, {0, 0}});
  CHECK(s.s[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.s[1] == doctest::Approx(0.0));
  CHECK(std::abs(s.u(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.u(1, 0)) == doctest::Approx(0.0));
  CHECK(std::abs(s.v(0, 0)) == doctest::Approx(1.0));
  CHECK(orthonormality_error(s.u) < 1e-12);
}

TEST_CASE("svd reconstruction, ordering and orthonormality on random shapes") {
  std::mt19937_64 rng(5);
  check_svd(testutil::random_matrix(4, 3, rng));
  for (int t = 0; t < 60; ++t) check_svd(testutil::random_matrix(1 + t % 9, 1 + (t / 9) % 7, rng));
  check_svd(testutil::random_matrix(40, 64, rng));
  check_svd(Matrix(3, 3));  // all zero: basis completion only
  Matrix low(6, 4);
  add_outer(low, 1.0, testutil::random_vector(6, rng), testutil::random_vector(4, rng));
  add_outer(low, 0.5, testutil::random_vector(6, rng), testutil::random_vector(4, rng));
  check_svd(low);
}

TEST_CASE("svd iteration cap") {
  std::mt19937_64 rng(2);
  try {
    svd_small(testutil::random_matrix(8, 8, rng), 0);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonConvergence);
  }
}
