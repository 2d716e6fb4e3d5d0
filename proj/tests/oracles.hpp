#pragma once

// Independent numerical oracles for the test suite, backed by Eigen so they
// share no code path with the library implementations they check.

#include <Eigen/Dense>
#include <vector>

#include "hessfit/matrix.hpp"

namespace oracles {

inline Eigen::MatrixXd to_eigen(const hessfit::Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(static_cast<long>(i), static_cast<long>(j)) = m(i, j);
  }
  return out;
}

inline hessfit::Matrix from_eigen(const Eigen::MatrixXd& m) {
  hessfit::Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  }
  return out;
}

// Largest singular value by full SVD.
inline double sigma_max(const hessfit::Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  return svd.singularValues()(0);
}

// Ascending eigenvalues of a symmetric matrix.
inline std::vector<double> sym_eigenvalues(const hessfit::Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
  const auto& ev = es.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

inline double lambda_min(const hessfit::Matrix& m) { return sym_eigenvalues(m).front(); }
inline double lambda_max(const hessfit::Matrix& m) { return sym_eigenvalues(m).back(); }

// Symmetric polar factor of an invertible matrix (the SPD part of Q = U S).
inline hessfit::Matrix polar_symmetric_factor(const hessfit::Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd s =
      svd.matrixV() * svd.singularValues().asDiagonal() * svd.matrixV().transpose();
  return from_eigen(s);
}

// A^{power} for symmetric positive definite A via eigendecomposition.
inline hessfit::Matrix spd_power(const hessfit::Matrix& m, double power) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
  const Eigen::MatrixXd out = es.eigenvectors() *
                              es.eigenvalues().array().pow(power).matrix().asDiagonal() *
                              es.eigenvectors().transpose();
  return from_eigen(out);
}

}  // namespace oracles
