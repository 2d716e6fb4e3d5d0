#pragma once

#include <limits>

#include "hessfit/linalg.hpp"
#include "hessfit/matrix.hpp"
#include "hessfit/rng.hpp"

namespace hessfit {

// A probe vector together with its (possibly noisy) Hessian-vector response
// h = H v + eps. For gradient/momentum whitening the response slot carries
// the gradient or momentum instead.
struct HvpPair {
  Vector v;
  Vector h;
};

struct DampingConfig {
  double eta = 1e-9;
  double machine_eps = std::numeric_limits<double>::epsilon();
};

// c(P; v, h) = h'Ph + v' P^{-1} v. P must be SPD; the inverse is applied via
// a Cholesky solve, never formed.
double criterion_eval(const Matrix& p, const HvpPair& pair);

// dc/dP = h h' - P^{-1} v v' P^{-1}, the steepest ascent direction before
// accounting for the symmetry constraint on P.
Matrix criterion_gradient(const Matrix& p, const HvpPair& pair);

// E_v[c] = tr(P (Hsq + noise_cov) + P^{-1}).
double expected_criterion(const Matrix& p, const Matrix& hsq, const Matrix& noise_cov);

// The minimizer (Hsq + noise_cov)^{-1/2}.
Matrix optimal_preconditioner(const Matrix& hsq, const Matrix& noise_cov);

// Adds damping noise nu ~ N(0, eta^2 I + eps^2 diag(|h|^2)) to the response
// so the fitted preconditioner stays bounded even for singular curvature.
HvpPair damp_hvp(const HvpPair& pair, const DampingConfig& cfg, CounterRng& rng);

}  // namespace hessfit
