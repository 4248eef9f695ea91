#pragma once

// Dense kernels for the small symmetric matrices that carry class covariances,
// plus a plain row-major matrix for batches of vectors.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace btrip {

using Vector = std::vector<double>;

/// Row-major rows x cols matrix. Rows are exposed as spans so batches of
/// embeddings can be passed around without copies.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric d x d matrix. Writes go through set(), which mirrors the entry,
/// so (i, j) and (j, i) are always bit-identical.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double fill = 0.0);

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(std::span<const double> diag);
  static SymMatrix diagonal(std::initializer_list<double> diag);
  /// Throws DomainError if the rows are not exactly symmetric.
  static SymMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// Symmetrizes a square matrix as (m + m^T) / 2.
  static SymMatrix symmetrized(const Matrix& m);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double v);
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> data() const noexcept { return data_; }

  double trace() const;
  /// this += scale * v v^T
  void add_outer(std::span<const double> v, double scale = 1.0);
  void add_diagonal(double eps);

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator*=(double s);
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

  Vector multiply(std::span<const double> x) const;
  bool operator==(const SymMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Lower-triangular Cholesky factor: source == lower * lower^T.
class CholFactor {
 public:
  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return lower_[i * dim_ + j]; }

  /// lower * z
  Vector lower_multiply(std::span<const double> z) const;
  /// Reconstructs lower * lower^T.
  SymMatrix reconstruct() const;

 private:
  friend CholFactor cholesky(const SymMatrix& a);
  std::size_t dim_ = 0;
  std::vector<double> lower_;
};

/// Throws NotPositiveDefiniteError with the failing pivot.
CholFactor cholesky(const SymMatrix& a);

double spd_logdet(const CholFactor& f);

/// Solves A y = x with A = L L^T.
Vector spd_solve(const CholFactor& f, std::span<const double> x);

/// x^T A^{-1} x
double spd_quadratic_form(const CholFactor& f, std::span<const double> x);

SymMatrix spd_inverse(const CholFactor& f);

/// tr(A^{-1} B) for SPD A given its factor.
double spd_trace_solve(const CholFactor& a, const SymMatrix& b);

/// Returns a + eps I with eps = eps_scale * max(trace(a) / dim, 1).
SymMatrix regularize_psd(const SymMatrix& a, double eps_scale);

double frobenius_norm(const SymMatrix& a);
/// ||a - b||_F / ||b||_F (absolute difference when b is zero).
double relative_frobenius_error(const SymMatrix& a, const SymMatrix& b);

double squared_distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace btrip
