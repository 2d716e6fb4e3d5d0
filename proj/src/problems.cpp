#include "hessfit/problems.hpp"

#include <memory>

namespace hessfit {

Tensor3 planted_trd_tensor(std::size_t ni, std::size_t nj, std::size_t nk, std::size_t rank,
                           CounterRng& rng) {
  Tensor3 t(ni, nj, nk);
  Matrix a(rank, ni), b(rank, nj), c(rank, nk);
  for (double& x : a.data()) x = rng.normal();
  for (double& x : b.data()) x = rng.normal();
  for (double& x : c.data()) x = rng.normal();
  for (std::size_t r = 0; r < rank; ++r) {
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t j = 0; j < nj; ++j) {
        const double ab = a(r, i) * b(r, j);
        double* slab = &t.data[(i * nj + j) * nk];
        const double* crow = c.row_ptr(r);
        for (std::size_t k = 0; k < nk; ++k) slab[k] += ab * crow[k];
      }
    }
  }
  return t;
}

namespace {

struct TrdWork {
  Tensor3 tau;
  std::size_t rank;
  std::size_t ni, nj, nk;

  std::size_t dim() const { return rank * (ni + nj + nk); }

  // Residual E = tau - sum_r x_r o y_r o z_r; returns sum of squares.
  double residual(const Vector& theta, Tensor3& e) const {
    e = tau;
    const double* x = theta.data();
    const double* y = x + rank * ni;
    const double* z = y + rank * nj;
    for (std::size_t r = 0; r < rank; ++r) {
      const double* zr = z + r * nk;
      for (std::size_t i = 0; i < ni; ++i) {
        const double xri = x[r * ni + i];
        for (std::size_t j = 0; j < nj; ++j) {
          const double w = xri * y[r * nj + j];
          if (w == 0.0) continue;
          double* slab = &e.data[(i * nj + j) * nk];
          for (std::size_t k = 0; k < nk; ++k) slab[k] -= w * zr[k];
        }
      }
    }
    double loss = 0.0;
    for (double v : e.data) loss += v * v;
    return loss;
  }

  std::pair<double, Vector> loss_grad(const Vector& theta) const {
    Tensor3 e;
    const double loss = residual(theta, e);
    Vector g(dim(), 0.0);
    const double* x = theta.data();
    const double* y = x + rank * ni;
    const double* z = y + rank * nj;
    double* gx = g.data();
    double* gy = gx + rank * ni;
    double* gz = gy + rank * nj;

    std::vector<double> m(ni * nj);   // sum_k E(i,j,k) z_rk
    std::vector<double> t(nj * nk);   // sum_i E(i,j,k) x_ri
    for (std::size_t r = 0; r < rank; ++r) {
      const double* yr = y + r * nj;
      const double* zr = z + r * nk;
      const double* xr = x + r * ni;

      std::fill(m.begin(), m.end(), 0.0);
      std::fill(t.begin(), t.end(), 0.0);
      for (std::size_t i = 0; i < ni; ++i) {
        const double xri = xr[i];
        for (std::size_t j = 0; j < nj; ++j) {
          const double* slab = &e.data[(i * nj + j) * nk];
          double acc = 0.0;
          double* trow = &t[j * nk];
          for (std::size_t k = 0; k < nk; ++k) {
            acc += slab[k] * zr[k];
            trow[k] += slab[k] * xri;
          }
          m[i * nj + j] = acc;
        }
      }
      for (std::size_t i = 0; i < ni; ++i) {
        double acc = 0.0;
        const double* mrow = &m[i * nj];
        for (std::size_t j = 0; j < nj; ++j) acc += mrow[j] * yr[j];
        gx[r * ni + i] = -2.0 * acc;
      }
      for (std::size_t j = 0; j < nj; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ni; ++i) acc += m[i * nj + j] * xr[i];
        gy[r * nj + j] = -2.0 * acc;
      }
      for (std::size_t k = 0; k < nk; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < nj; ++j) acc += t[j * nk + k] * yr[j];
        gz[r * nk + k] = -2.0 * acc;
      }
    }
    return {loss, std::move(g)};
  }
};

}  // namespace

Problem trd_problem(const Tensor3& tau, std::size_t rank) {
  if (rank < 1) throw InvalidArgumentError("trd_problem: rank must be >= 1");
  auto work = std::make_shared<TrdWork>(TrdWork{tau, rank, tau.ni, tau.nj, tau.nk});
  Problem p;
  p.dim = work->dim();
  p.loss = [work](const Vector& theta) {
    Tensor3 e;
    return work->residual(theta, e);
  };
  p.grad = [work](const Vector& theta) { return work->loss_grad(theta).second; };
  p.loss_grad = [work](const Vector& theta) { return work->loss_grad(theta); };
  return p;
}

Problem quadratic_problem(const Matrix& h) {
  detail::require_square(h, "quadratic_problem");
  auto hp = std::make_shared<Matrix>(h);
  Problem p;
  p.dim = h.rows();
  p.loss = [hp](const Vector& theta) { return 0.5 * dot(theta, matvec(*hp, theta)); };
  p.grad = [hp](const Vector& theta) { return matvec(*hp, theta); };
  p.hvp = [hp](const Vector&, const Vector& v) { return matvec(*hp, v); };
  return p;
}

}  // namespace hessfit
