#include "hessfit/criterion.hpp"

#include <cmath>

namespace hessfit {

namespace {

void require_pair_dims(const Matrix& p, const HvpPair& pair, const char* op) {
  if (pair.v.size() != pair.h.size() || pair.v.size() != p.rows() || !p.square()) {
    throw DimensionError(std::string(op) + ": pair/preconditioner dimension mismatch");
  }
}

}  // namespace

double criterion_eval(const Matrix& p, const HvpPair& pair) {
  require_pair_dims(p, pair, "criterion_eval");
  const Vector ph = matvec(p, pair.h);
  const Vector pinv_v = spd_solve(p, pair.v);
  return dot(pair.h, ph) + dot(pair.v, pinv_v);
}

Matrix criterion_gradient(const Matrix& p, const HvpPair& pair) {
  require_pair_dims(p, pair, "criterion_gradient");
  const Vector w = spd_solve(p, pair.v);
  Matrix g = Matrix::outer(pair.h, pair.h);
  g.add_outer(-1.0, w, w);
  return g;
}

double expected_criterion(const Matrix& p, const Matrix& hsq, const Matrix& noise_cov) {
  detail::require_same_shape(p, hsq, "expected_criterion");
  detail::require_same_shape(p, noise_cov, "expected_criterion");
  const Matrix a = hsq + noise_cov;
  double tr_pa = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) tr_pa += p(i, j) * a(j, i);
  }
  const Matrix chol = cholesky_lower(p);
  double tr_pinv = 0.0;
  Vector e(p.rows(), 0.0);
  for (std::size_t j = 0; j < p.rows(); ++j) {
    e[j] = 1.0;
    tr_pinv += cholesky_solve(chol, e)[j];
    e[j] = 0.0;
  }
  return tr_pa + tr_pinv;
}

Matrix optimal_preconditioner(const Matrix& hsq, const Matrix& noise_cov) {
  detail::require_same_shape(hsq, noise_cov, "optimal_preconditioner");
  const Matrix a = symmetrize(hsq + noise_cov);
  try {
    return spd_power(a, -0.5);
  } catch (const DefinitenessError&) {
    throw DefinitenessError("optimal_preconditioner: Hsq + noise_cov is not positive definite");
  }
}

HvpPair damp_hvp(const HvpPair& pair, const DampingConfig& cfg, CounterRng& rng) {
  if (pair.v.size() != pair.h.size()) throw DimensionError("damp_hvp: pair length mismatch");
  HvpPair out = pair;
  if (cfg.eta == 0.0 && cfg.machine_eps == 0.0) return out;
  const double eta_sq = cfg.eta * cfg.eta;
  const double eps_sq = cfg.machine_eps * cfg.machine_eps;
  for (std::size_t i = 0; i < out.h.size(); ++i) {
    const double sd = std::sqrt(eta_sq + eps_sq * pair.h[i] * pair.h[i]);
    out.h[i] += sd * rng.normal();
  }
  return out;
}

}  // namespace hessfit
