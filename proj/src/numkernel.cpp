#include "mmhash/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mmhash/error.hpp"

namespace mmhash {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::IndexOutOfRange: return "index out of range";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::NumericalFailure: return "numerical failure";
    case ErrorCode::Infeasible: return "infeasible request";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

namespace {

void require_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values))
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": non-finite entry");
}

}  // namespace

Vector::Vector(std::size_t len, double fill) : data_(len, fill) {
  require_finite({&fill, 1}, "Vector");
}

Vector::Vector(std::initializer_list<double> values) : data_(values) {
  require_finite(data_, "Vector");
}

Vector::Vector(std::vector<double> values) : data_(std::move(values)) {
  require_finite(data_, "Vector");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require_finite({&fill, 1}, "Matrix");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols)
    throw Error(ErrorCode::DimensionMismatch,
                "Matrix: " + std::to_string(data_.size()) + " values for " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  require_finite(data_, "Matrix");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_)
      throw Error(ErrorCode::DimensionMismatch, "Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_, "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double scale, std::span<const double> a, std::span<double> out) {
  if (a.size() != out.size())
    throw Error(ErrorCode::DimensionMismatch, "axpy: length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += scale * a[i];
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size())
    throw Error(ErrorCode::DimensionMismatch,
                "matvec: matrix has " + std::to_string(m.cols()) +
                    " columns, vector has " + std::to_string(v.size()));
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  if (m.rows() != v.size())
    throw Error(ErrorCode::DimensionMismatch, "matvec_transposed: length mismatch");
  Vector out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double vr = v[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * vr;
  }
  return out;
}

void add_outer(Matrix& m, double scale, std::span<const double> u,
               std::span<const double> v) {
  if (m.rows() != u.size() || m.cols() != v.size())
    throw Error(ErrorCode::DimensionMismatch, "add_outer: shape mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double su = scale * u[r];
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += su * v[c];
  }
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorCode::DimensionMismatch, "matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

double frobenius_norm(const Matrix& m) { return norm(m.span()); }

namespace {

// Columns of `cols` (stored as rows of a k x n matrix for locality) that have
// zero norm are replaced by unit vectors orthogonal to the others.
void complete_orthonormal(Matrix& cols, const std::vector<bool>& is_zero) {
  const std::size_t k = cols.rows();
  const std::size_t n = cols.cols();
  for (std::size_t j = 0; j < k; ++j) {
    if (!is_zero[j]) continue;
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < n; ++e) {
      std::vector<double> cand(n, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < k; ++i) {
          if (i == j || (is_zero[i] && i > j)) continue;
          const double proj = dot(cols.row(i), cand);
          axpy(-proj, cols.row(i), cand);
        }
      }
      const double nn = norm(cand);
      if (nn > best_norm) {
        best_norm = nn;
        best = std::move(cand);
      }
    }
    auto row = cols.row(j);
    for (std::size_t c = 0; c < n; ++c) row[c] = best[c] / best_norm;
  }
}

// Requires rows >= cols.
Svd jacobi_tall(const Matrix& m, int max_sweeps) {
  const std::size_t rows = m.rows();
  const std::size_t k = m.cols();
  // Work on columns stored contiguously: work is k x rows (= m^T).
  Matrix work = transpose(m);
  Matrix v = Matrix::identity(k);  // row j holds column j of V

  constexpr double kTol = 1e-15;
  bool converged = k < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        auto ci = work.row(i);
        auto cj = work.row(j);
        const double alpha = dot(ci, ci);
        const double beta = dot(cj, cj);
        const double gamma = dot(ci, cj);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const double a = ci[r];
          const double b = cj[r];
          ci[r] = c * a - s * b;
          cj[r] = s * a + c * b;
        }
        auto vi = v.row(i);
        auto vj = v.row(j);
        for (std::size_t r = 0; r < k; ++r) {
          const double a = vi[r];
          const double b = vj[r];
          vi[r] = c * a - s * b;
          vj[r] = s * a + c * b;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged)
    throw Error(ErrorCode::NonConvergence,
                "svd_small: no convergence after " + std::to_string(max_sweeps) +
                    " sweeps");

  std::vector<double> sv(k);
  double smax = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    sv[j] = norm(work.row(j));
    smax = std::max(smax, sv[j]);
  }
  const double zero_cut = smax * 1e-14 * static_cast<double>(std::max(rows, k));
  std::vector<bool> is_zero(k);
  for (std::size_t j = 0; j < k; ++j) {
    is_zero[j] = sv[j] <= zero_cut;
    if (is_zero[j]) {
      sv[j] = 0.0;
      for (auto& x : work.row(j)) x = 0.0;
    } else {
      for (auto& x : work.row(j)) x /= sv[j];
    }
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sv[a] > sv[b]; });

  Matrix ut(k, rows);
  Matrix vt(k, k);
  Vector s(k);
  std::vector<bool> zero_sorted(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    s[j] = sv[src];
    zero_sorted[j] = is_zero[src];
    std::copy(work.row(src).begin(), work.row(src).end(), ut.row(j).begin());
    std::copy(v.row(src).begin(), v.row(src).end(), vt.row(j).begin());
  }
  complete_orthonormal(ut, zero_sorted);
  return {transpose(ut), std::move(s), transpose(vt)};
}

}  // namespace

Svd svd_small(const Matrix& m, int max_sweeps) {
  if (!all_finite(m.span()))
    throw Error(ErrorCode::InvalidArgument, "svd_small: non-finite input");
  if (m.rows() >= m.cols()) return jacobi_tall(m, max_sweeps);
  Svd t = jacobi_tall(transpose(m), max_sweeps);
  return {std::move(t.v), std::move(t.s), std::move(t.u)};
}

}  // namespace mmhash
