#include "btrip/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "btrip/error.hpp"

namespace btrip {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    require_dims(row.size(), c, "Matrix::from_rows row length");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

SymMatrix::SymMatrix(std::size_t dim, double fill) : dim_(dim), data_(dim * dim, fill) {
  if (dim == 0) fail(ErrorCode::DomainError, "SymMatrix dimension must be >= 1");
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.data_[i * dim + i] = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.data_[i * diag.size() + i] = diag[i];
  return m;
}

SymMatrix SymMatrix::diagonal(std::initializer_list<double> diag) {
  return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

SymMatrix SymMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const Matrix m = Matrix::from_rows(rows);
  require_dims(m.cols(), m.rows(), "SymMatrix::from_rows column count");
  SymMatrix s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) fail(ErrorCode::DomainError, "SymMatrix::from_rows input is not symmetric");
      s.data_[i * s.dim_ + j] = m(i, j);
    }
  }
  return s;
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
  require_dims(m.cols(), m.rows(), "SymMatrix::symmetrized column count");
  SymMatrix s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
  }
  return s;
}

void SymMatrix::set(std::size_t i, std::size_t j, double v) {
  data_[i * dim_ + j] = v;
  data_[j * dim_ + i] = v;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
  return t;
}

void SymMatrix::add_outer(std::span<const double> v, double scale) {
  require_dims(v.size(), dim_, "SymMatrix::add_outer");
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double val = data_[i * dim_ + j] + scale * v[i] * v[j];
      data_[i * dim_ + j] = val;
      data_[j * dim_ + i] = val;
    }
  }
}

void SymMatrix::add_diagonal(double eps) {
  for (std::size_t i = 0; i < dim_; ++i) data_[i * dim_ + i] += eps;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  require_dims(o.dim_, dim_, "SymMatrix::operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Vector SymMatrix::multiply(std::span<const double> x) const {
  require_dims(x.size(), dim_, "SymMatrix::multiply");
  Vector y(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) acc += data_[i * dim_ + j] * x[j];
    y[i] = acc;
  }
  return y;
}

CholFactor cholesky(const SymMatrix& a) {
  const std::size_t n = a.dim();
  CholFactor f;
  f.dim_ = n;
  f.lower_.assign(n * n, 0.0);
  auto L = [&](std::size_t i, std::size_t j) -> double& { return f.lower_[i * n + j]; };
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) throw NotPositiveDefiniteError(j);
    const double ljj = std::sqrt(diag);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return f;
}

Vector CholFactor::lower_multiply(std::span<const double> z) const {
  require_dims(z.size(), dim_, "CholFactor::lower_multiply");
  Vector y(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k <= i; ++k) acc += lower_[i * dim_ + k] * z[k];
    y[i] = acc;
  }
  return y;
}

SymMatrix CholFactor::reconstruct() const {
  SymMatrix a(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k <= j; ++k) acc += lower_[i * dim_ + k] * lower_[j * dim_ + k];
      a.set(i, j, acc);
    }
  }
  return a;
}

double spd_logdet(const CholFactor& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) s += std::log(f(i, i));
  return 2.0 * s;
}

Vector spd_solve(const CholFactor& f, std::span<const double> x) {
  const std::size_t n = f.dim();
  require_dims(x.size(), n, "spd_solve");
  Vector y(x.begin(), x.end());
  // forward: L w = x
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= f(i, k) * y[k];
    y[i] = s / f(i, i);
  }
  // backward: L^T y = w
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= f(k, ii) * y[k];
    y[ii] = s / f(ii, ii);
  }
  return y;
}

double spd_quadratic_form(const CholFactor& f, std::span<const double> x) {
  const std::size_t n = f.dim();
  require_dims(x.size(), n, "spd_quadratic_form");
  // ||L^{-1} x||^2
  Vector w(x.begin(), x.end());
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = w[i];
    for (std::size_t k = 0; k < i; ++k) s -= f(i, k) * w[k];
    w[i] = s / f(i, i);
    q += w[i] * w[i];
  }
  return q;
}

SymMatrix spd_inverse(const CholFactor& f) {
  const std::size_t n = f.dim();
  Matrix cols(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector c = spd_solve(f, e);
    for (std::size_t i = 0; i < n; ++i) cols(i, j) = c[i];
    e[j] = 0.0;
  }
  return SymMatrix::symmetrized(cols);
}

double spd_trace_solve(const CholFactor& a, const SymMatrix& b) {
  const std::size_t n = a.dim();
  require_dims(b.dim(), n, "spd_trace_solve");
  double t = 0.0;
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = b(i, j);
    t += spd_solve(a, col)[j];
  }
  return t;
}

SymMatrix regularize_psd(const SymMatrix& a, double eps_scale) {
  if (!(eps_scale > 0.0)) fail(ErrorCode::DomainError, "regularize_psd: eps_scale must be positive");
  const double mean_diag = a.trace() / static_cast<double>(a.dim());
  SymMatrix out = a;
  out.add_diagonal(eps_scale * std::max(mean_diag, 1.0));
  return out;
}

double frobenius_norm(const SymMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double relative_frobenius_error(const SymMatrix& a, const SymMatrix& b) {
  require_dims(a.dim(), b.dim(), "relative_frobenius_error");
  double diff = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    diff += d * d;
  }
  const double ref = frobenius_norm(b);
  return ref > 0.0 ? std::sqrt(diff) / ref : std::sqrt(diff);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace btrip
