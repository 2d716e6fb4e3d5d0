#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hessfit/errors.hpp"

namespace hessfit {

using Vector = std::vector<double>;

// Dense row-major double matrix. This is the single numeric carrier used
// throughout the library; all sizes here are desk scale (n <= a few thousand),
// so the implementation favors clarity and reproducibility over blocking.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  static Matrix identity(std::size_t n);
  static Matrix from_diag(const Vector& d);
  // Outer product u * w'.
  static Matrix outer(const Vector& u, const Vector& w);
  // Symmetric outer u * w' + w * u', built entrywise so the result is
  // symmetric to the last bit.
  static Matrix sym_outer(const Vector& u, const Vector& w);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  // this += s * u * w'
  void add_outer(double s, const Vector& u, const Vector& w);
  // this += s * (u * w' + w * u'), symmetry-exact when this is symmetric
  void add_sym_outer(double s, const Vector& u, const Vector& w);

  Vector diagonal() const;
  double trace() const;
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
// (a + a') / 2
Matrix symmetrize(const Matrix& a);

Vector matvec(const Matrix& a, const Vector& x);
// a' * x without forming the transpose
Vector matvec_t(const Matrix& a, const Vector& x);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
double norm2_squared(const Vector& a);
double norm_inf(const Vector& a);
Vector axpy(double s, const Vector& x, const Vector& y);  // s*x + y
Vector scale(double s, Vector x);
Vector vsub(const Vector& a, const Vector& b);
Vector vadd(const Vector& a, const Vector& b);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
// max |a - a'| entry, 0 for the empty matrix
double asymmetry(const Matrix& a);

// Strict and inclusive triangular parts; k = 0 keeps the diagonal,
// k = 1 drops it (matches triu(A) and triu(A, 1)).
Matrix triu(const Matrix& a, int k = 0);
Matrix tril(const Matrix& a, int k = 0);

// Frobenius distance ||a - b||_F.
double frobenius_distance(const Matrix& a, const Matrix& b);

// In-place Cholesky factor (lower). Throws SingularError when a pivot is
// not strictly positive; used as the SPD test throughout.
Matrix cholesky_lower(const Matrix& spd);
Vector cholesky_solve(const Matrix& chol_lower, const Vector& rhs);
Matrix cholesky_solve(const Matrix& chol_lower, const Matrix& rhs);
// Solve spd * x = rhs via Cholesky in one call.
Vector spd_solve(const Matrix& spd, const Vector& rhs);

// LU with partial pivoting for general square systems.
struct LuFactors {
  Matrix lu;
  std::vector<std::size_t> perm;
  int sign = 1;
};
LuFactors lu_factor(const Matrix& a);
Vector lu_solve(const LuFactors& f, Vector rhs);
Matrix lu_inverse(const Matrix& a);
double lu_determinant(const Matrix& a);

// Triangular solves. upper: solve u * x = rhs; upper_t: solve u' * x = rhs.
Vector solve_upper(const Matrix& u, const Vector& rhs);
Vector solve_upper_transposed(const Matrix& u, const Vector& rhs);

namespace detail {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op);
void require_square(const Matrix& a, const char* op);
}  // namespace detail

}  // namespace hessfit
