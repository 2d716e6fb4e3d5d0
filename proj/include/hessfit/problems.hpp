#pragma once

#include "hessfit/optimizer.hpp"

namespace hessfit {

// Dense third-order tensor, k contiguous.
struct Tensor3 {
  std::size_t ni = 0, nj = 0, nk = 0;
  Vector data;

  Tensor3() = default;
  Tensor3(std::size_t i, std::size_t j, std::size_t k) : ni(i), nj(j), nk(k), data(i * j * k, 0.0) {}
  double& at(std::size_t i, std::size_t j, std::size_t k) { return data[(i * nj + j) * nk + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * nj + j) * nk + k];
  }
};

// Rank-R tensor sum_r a_r o b_r o c_r with standard normal factor entries.
Tensor3 planted_trd_tensor(std::size_t ni, std::size_t nj, std::size_t nk, std::size_t rank,
                           CounterRng& rng);

// Least-squares rank-R decomposition objective over theta = concat(x, y, z)
// with x in R^{R x I} (row-major per factor), analytic gradient, no exact
// Hessian-vector product.
Problem trd_problem(const Tensor3& tau, std::size_t rank);

// 0.5 theta' H theta with exact gradient and Hessian-vector product.
Problem quadratic_problem(const Matrix& h);

}  // namespace hessfit
