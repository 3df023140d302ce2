#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mmhash {

// Dense double-precision vector. Construction from explicit values rejects
// non-finite entries; element writes after construction are unchecked.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0);
  Vector(std::initializer_list<double> values);
  explicit Vector(std::vector<double> values);

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  operator std::span<const double>() const noexcept { return data_; }

  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> values);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// out += scale * a
void axpy(double scale, std::span<const double> a, std::span<double> out);

Vector matvec(const Matrix& m, std::span<const double> v);
// m^T v
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
// m += scale * u v^T
void add_outer(Matrix& m, double scale, std::span<const double> u,
               std::span<const double> v);

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);

// Thin SVD: for an r x c input with k = min(r, c), u is r x k, s has k
// non-increasing non-negative entries and v is c x k. Columns of u and v are
// orthonormal, including those paired with zero singular values.
struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

// One-sided (Hestenes) Jacobi. Throws Error{NonConvergence} past max_sweeps.
Svd svd_small(const Matrix& m, int max_sweeps = 100);

}  // namespace mmhash
