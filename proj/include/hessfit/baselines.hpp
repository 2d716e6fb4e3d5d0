#pragma once

#include "hessfit/criterion.hpp"
#include "hessfit/linalg.hpp"
#include "hessfit/matrix.hpp"

namespace hessfit {

// One Euclidean SGD step P - mu * (h h' - P^{-1} v v' P^{-1}). Keeps exact
// symmetry when P is symmetric.
Matrix euclid_sgd_step(const Matrix& p, const HvpPair& pair, double mu);

// Running closed-form estimate: accumulates an exponential moving average of
// h h' and reads the preconditioner back as its inverse square root. The
// averaging factor follows (t+1)/(t+2) until it hits ema_clip.
class RunningClosedForm {
 public:
  // p0 must be SPD; the accumulator starts at p0^{-2}.
  RunningClosedForm(const Matrix& p0, double ema_clip = 0.999);

  void update(const Vector& h);
  // Current P = accumulator^{-1/2}; costs an eigendecomposition.
  Matrix preconditioner() const;
  long step_count() const { return t_; }
  const Matrix& inverse_square() const { return pinv_sq_; }

 private:
  Matrix pinv_sq_;
  long t_ = 0;
  double ema_clip_;
};

// update + preconditioner in one call.
std::pair<RunningClosedForm, Matrix> running_closed_form_step(RunningClosedForm state,
                                                              const Vector& h);

// Unique SPD solution of P * sum_hh * P = sum_vv.
Matrix riccati_solve(const Matrix& sum_vv, const Matrix& sum_hh);

// Newton-Schulz iterations from p0 toward Hsq^{-1/2}; caller is responsible
// for the spectral precondition on Hsq * p0. Growth beyond 1e6x of the
// starting norm raises DivergenceError.
Matrix newton_fit(const Matrix& hsq, const Matrix& p0, std::size_t iters);

// SGD step on the SPD manifold: E = -mu (P hh' + hh' P - vv' P^{-1} - P^{-1} vv'),
// P <- P + PE + EP.
Matrix spd_manifold_step(const Matrix& p, const HvpPair& pair, double mu);

// Classic BFGS inverse-Hessian update; requires the curvature condition
// v'h > 0 and satisfies the secant equation P' h = v exactly.
Matrix bfgs_step(const Matrix& p, const HvpPair& pair);

}  // namespace hessfit
