#include "hessfit/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hessfit {

namespace detail {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

void require_square(const Matrix& a, const char* op) {
  if (!a.square() || a.empty()) {
    throw DimensionError(std::string(op) + ": square nonempty matrix required, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

}  // namespace detail

Matrix::Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
    : rows_(rows), cols_(cols), data_(values) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: initializer length does not match shape");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_diag(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::outer(const Vector& u, const Vector& w) {
  Matrix m(u.size(), w.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    double* row = m.row_ptr(i);
    const double ui = u[i];
    for (std::size_t j = 0; j < w.size(); ++j) row[j] = ui * w[j];
  }
  return m;
}

Matrix Matrix::sym_outer(const Vector& u, const Vector& w) {
  if (u.size() != w.size()) throw DimensionError("sym_outer: length mismatch");
  Matrix m(u.size(), u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      m(i, j) = u[i] * w[j] + w[i] * u[j];
    }
  }
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  detail::require_same_shape(*this, other, "operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  detail::require_same_shape(*this, other, "operator-=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

void Matrix::add_outer(double s, const Vector& u, const Vector& w) {
  if (u.size() != rows_ || w.size() != cols_) throw DimensionError("add_outer: length mismatch");
  // s scales the product u_i * w_j, not u alone, so u == w yields an exactly
  // symmetric update.
  for (std::size_t i = 0; i < rows_; ++i) {
    double* row = row_ptr(i);
    const double ui = u[i];
    for (std::size_t j = 0; j < cols_; ++j) row[j] += s * (ui * w[j]);
  }
}

void Matrix::add_sym_outer(double s, const Vector& u, const Vector& w) {
  detail::require_square(*this, "add_sym_outer");
  if (u.size() != rows_ || w.size() != rows_) throw DimensionError("add_sym_outer: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) {
    double* row = row_ptr(i);
    for (std::size_t j = 0; j < cols_; ++j) {
      row[j] += s * (u[i] * w[j] + w[i] * u[j]);
    }
  }
}

Vector Matrix::diagonal() const {
  const std::size_t n = std::min(rows_, cols_);
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (*this)(i, i);
  return d;
}

double Matrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("operator*: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* crow = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Matrix symmetrize(const Matrix& a) {
  detail::require_square(a, "symmetrize");
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  }
  return s;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw DimensionError("matvec: length mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) throw DimensionError("matvec_t: length mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row_ptr(i);
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * xi;
  }
  return y;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2_squared(const Vector& a) { return dot(a, a); }
double norm2(const Vector& a) { return std::sqrt(norm2_squared(a)); }

double norm_inf(const Vector& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::fabs(x));
  return m;
}

Vector axpy(double s, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  Vector z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = s * x[i] + y[i];
  return z;
}

Vector scale(double s, Vector x) {
  for (double& v : x) v *= s;
  return x;
}

Vector vsub(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("vsub: length mismatch");
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

Vector vadd(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("vadd: length mismatch");
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x * x;
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::fabs(x));
  return m;
}

double asymmetry(const Matrix& a) {
  if (!a.square()) throw DimensionError("asymmetry: square matrix required");
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      m = std::max(m, std::fabs(a(i, j) - a(j, i)));
    }
  }
  return m;
}

Matrix triu(const Matrix& a, int k) {
  Matrix t(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (static_cast<long long>(j) - static_cast<long long>(i) >= k) t(i, j) = a(i, j);
    }
  }
  return t;
}

Matrix tril(const Matrix& a, int k) {
  Matrix t(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (static_cast<long long>(j) - static_cast<long long>(i) <= k) t(i, j) = a(i, j);
    }
  }
  return t;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "frobenius_distance");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Matrix cholesky_lower(const Matrix& spd) {
  detail::require_square(spd, "cholesky_lower");
  const std::size_t n = spd.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw SingularError("cholesky_lower: matrix is not positive definite");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Vector cholesky_solve(const Matrix& chol_lower, const Vector& rhs) {
  const std::size_t n = chol_lower.rows();
  if (rhs.size() != n) throw DimensionError("cholesky_solve: length mismatch");
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= chol_lower(i, k) * y[k];
    y[i] = s / chol_lower(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= chol_lower(k, ii) * y[k];
    y[ii] = s / chol_lower(ii, ii);
  }
  return y;
}

Matrix cholesky_solve(const Matrix& chol_lower, const Matrix& rhs) {
  Matrix x(rhs.rows(), rhs.cols());
  Vector col(rhs.rows());
  for (std::size_t j = 0; j < rhs.cols(); ++j) {
    for (std::size_t i = 0; i < rhs.rows(); ++i) col[i] = rhs(i, j);
    Vector sol = cholesky_solve(chol_lower, col);
    for (std::size_t i = 0; i < rhs.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Vector spd_solve(const Matrix& spd, const Vector& rhs) {
  return cholesky_solve(cholesky_lower(spd), rhs);
}

LuFactors lu_factor(const Matrix& a) {
  detail::require_square(a, "lu_factor");
  const std::size_t n = a.rows();
  LuFactors f;
  f.lu = a;
  f.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(f.lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(f.lu(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best)) {
      throw SingularError("lu_factor: singular matrix");
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(p, j));
      std::swap(f.perm[k], f.perm[p]);
      f.sign = -f.sign;
    }
    const double pivot = f.lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = f.lu(i, k) / pivot;
      f.lu(i, k) = m;
      if (m == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= m * f.lu(k, j);
    }
  }
  return f;
}

Vector lu_solve(const LuFactors& f, Vector rhs) {
  const std::size_t n = f.lu.rows();
  if (rhs.size() != n) throw DimensionError("lu_solve: length mismatch");
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = rhs[f.perm[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= f.lu(i, k) * y[k];
    y[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= f.lu(ii, k) * y[k];
    y[ii] = s / f.lu(ii, ii);
  }
  return y;
}

Matrix lu_inverse(const Matrix& a) {
  const LuFactors f = lu_factor(a);
  const std::size_t n = a.rows();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col = lu_solve(f, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  return inv;
}

double lu_determinant(const Matrix& a) {
  LuFactors f;
  try {
    f = lu_factor(a);
  } catch (const SingularError&) {
    return 0.0;
  }
  double det = f.sign;
  for (std::size_t i = 0; i < a.rows(); ++i) det *= f.lu(i, i);
  return det;
}

Vector solve_upper(const Matrix& u, const Vector& rhs) {
  detail::require_square(u, "solve_upper");
  const std::size_t n = u.rows();
  if (rhs.size() != n) throw DimensionError("solve_upper: length mismatch");
  Vector x(rhs);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    const double* row = u.row_ptr(ii);
    for (std::size_t k = ii + 1; k < n; ++k) s -= row[k] * x[k];
    const double d = row[ii];
    if (d == 0.0) throw SingularError("solve_upper: zero diagonal");
    x[ii] = s / d;
  }
  return x;
}

Vector solve_upper_transposed(const Matrix& u, const Vector& rhs) {
  detail::require_square(u, "solve_upper_transposed");
  const std::size_t n = u.rows();
  if (rhs.size() != n) throw DimensionError("solve_upper_transposed: length mismatch");
  // u' is lower triangular; forward substitution down the columns of u.
  Vector x(rhs);
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= u(k, i) * x[k];
    const double d = u(i, i);
    if (d == 0.0) throw SingularError("solve_upper_transposed: zero diagonal");
    x[i] = s / d;
  }
  return x;
}

}  // namespace hessfit
