#include "hessfit/baselines.hpp"

#include <cmath>
#include <string>

namespace hessfit {

Matrix euclid_sgd_step(const Matrix& p, const HvpPair& pair, double mu) {
  if (p.rows() != pair.v.size() || pair.v.size() != pair.h.size()) {
    throw DimensionError("euclid_sgd_step: dimension mismatch");
  }
  if (!(mu > 0.0)) throw InvalidArgumentError("euclid_sgd_step: mu must be positive");
  // General symmetric P may be indefinite mid-trajectory, so solve via LU.
  const Vector w = lu_solve(lu_factor(p), pair.v);
  Matrix out = p;
  out.add_outer(-mu, pair.h, pair.h);
  out.add_outer(mu, w, w);
  return out;
}

RunningClosedForm::RunningClosedForm(const Matrix& p0, double ema_clip) : ema_clip_(ema_clip) {
  detail::require_square(p0, "RunningClosedForm");
  if (!(ema_clip > 0.0 && ema_clip < 1.0)) {
    throw InvalidArgumentError("RunningClosedForm: ema_clip must be in (0,1)");
  }
  try {
    pinv_sq_ = spd_power(p0, -2.0, 0.0);
  } catch (const DefinitenessError&) {
    throw DefinitenessError("RunningClosedForm: p0 must be positive definite");
  }
}

void RunningClosedForm::update(const Vector& h) {
  if (h.size() != pinv_sq_.rows()) throw DimensionError("RunningClosedForm: length mismatch");
  const double gamma =
      std::min(static_cast<double>(t_ + 1) / static_cast<double>(t_ + 2), ema_clip_);
  pinv_sq_ *= gamma;
  pinv_sq_.add_outer(1.0 - gamma, h, h);
  ++t_;
}

Matrix RunningClosedForm::preconditioner() const {
  try {
    return spd_power(pinv_sq_, -0.5);
  } catch (const DefinitenessError&) {
    throw DefinitenessError("RunningClosedForm: accumulator is not positive definite");
  }
}

std::pair<RunningClosedForm, Matrix> running_closed_form_step(RunningClosedForm state,
                                                              const Vector& h) {
  state.update(h);
  Matrix p = state.preconditioner();
  return {std::move(state), std::move(p)};
}

Matrix riccati_solve(const Matrix& sum_vv, const Matrix& sum_hh) {
  detail::require_same_shape(sum_vv, sum_hh, "riccati_solve");
  Matrix a_half, a_inv_half;
  try {
    a_half = spd_power(sum_hh, 0.5);
    a_inv_half = spd_power(sum_hh, -0.5);
  } catch (const DefinitenessError&) {
    throw DefinitenessError("riccati_solve: sum_hh is not positive definite");
  }
  Matrix mid = symmetrize((a_half * sum_vv) * a_half);
  Matrix mid_half;
  try {
    mid_half = spd_power(mid, 0.5);
  } catch (const DefinitenessError&) {
    throw DefinitenessError("riccati_solve: sum_vv is not positive definite");
  }
  return symmetrize((a_inv_half * mid_half) * a_inv_half);
}

Matrix newton_fit(const Matrix& hsq, const Matrix& p0, std::size_t iters) {
  detail::require_same_shape(hsq, p0, "newton_fit");
  const double start_norm = frobenius_norm(p0);
  Matrix p = p0;
  for (std::size_t t = 0; t < iters; ++t) {
    p = newton_schulz_step(p, hsq);
    if (!p.all_finite() || frobenius_norm(p) > 1e6 * start_norm) {
      throw DivergenceError("newton_fit: iterate escaped after " + std::to_string(t + 1) +
                            " steps; check the spectral radius of Hsq * p0");
    }
  }
  return p;
}

Matrix spd_manifold_step(const Matrix& p, const HvpPair& pair, double mu) {
  if (p.rows() != pair.v.size() || pair.v.size() != pair.h.size()) {
    throw DimensionError("spd_manifold_step: dimension mismatch");
  }
  if (!(mu > 0.0)) throw InvalidArgumentError("spd_manifold_step: mu must be positive");
  const Vector ph = matvec(p, pair.h);
  const Vector w = spd_solve(p, pair.v);
  // E = -mu (P hh' + hh'P - vv'P^{-1} - P^{-1}vv'), symmetric by construction.
  Matrix e(p.rows(), p.cols());
  e.add_sym_outer(-mu, ph, pair.h);
  e.add_sym_outer(mu, pair.v, w);
  const Matrix pe = p * e;
  Matrix out = p;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) out(i, j) += pe(i, j) + pe(j, i);
  }
  return out;
}

Matrix bfgs_step(const Matrix& p, const HvpPair& pair) {
  if (p.rows() != pair.v.size() || pair.v.size() != pair.h.size()) {
    throw DimensionError("bfgs_step: dimension mismatch");
  }
  const double vh = dot(pair.v, pair.h);
  if (!(vh > 0.0)) {
    throw CurvatureError("bfgs_step: curvature condition v'h > 0 failed (v'h = " +
                         std::to_string(vh) + ")");
  }
  const double rho = 1.0 / vh;
  const Vector ph = matvec(p, pair.h);
  const double hph = dot(pair.h, ph);
  // (I - rho v h') P (I - rho h v') + rho v v'
  //   = P - rho (v (Ph)' + (Ph) v') + (rho^2 h'Ph + rho) v v'
  Matrix out = p;
  out.add_sym_outer(-rho, pair.v, ph);
  out.add_outer(rho * rho * hph + rho, pair.v, pair.v);
  return out;
}

}  // namespace hessfit
