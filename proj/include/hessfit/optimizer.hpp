#pragma once

#include <functional>
#include <memory>

#include "hessfit/criterion.hpp"
#include "hessfit/matrix.hpp"
#include "hessfit/rng.hpp"

namespace hessfit {

// A differentiable objective. `hvp` may be empty, in which case the
// optimizer falls back to central finite differences of the gradient.
// `loss_grad` is an optional fused evaluation for objectives where loss and
// gradient share most of the work.
struct Problem {
  std::size_t dim = 0;
  std::function<double(const Vector&)> loss;
  std::function<Vector(const Vector&)> grad;
  std::function<Vector(const Vector&, const Vector&)> hvp;
  std::function<std::pair<double, Vector>(const Vector&)> loss_grad;
};

// (grad(theta + delta v) - grad(theta - delta v)) / (2 delta).
Vector fd_hvp(const Problem& problem, const Vector& theta, const Vector& v, double delta);

// Optimal isotropic initial factor scale (h1'h1 / n)^{-1/4} from the first
// curvature sample; degenerate (zero) samples fall back to 1.
struct InitScale {
  double scale = 1.0;
  bool degenerate = false;
};
InitScale init_scale(const Vector& h1);

enum class PsgdMode { kHvp, kWhitenGrad, kWhitenMomentum };

struct OptimizerConfig {
  PsgdMode mode = PsgdMode::kHvp;
  // In whiten-momentum mode the fitted P is larger than the gradient-
  // whitening one by sqrt((1+beta)/(1-beta)); scale theta_lr down by that
  // factor when switching modes.
  double theta_lr = 0.01;
  double precond_lr = 0.1;
  double momentum_beta = 0.9;
  // <= 0 selects 1e-5 * (1 + ||theta||_inf) per call.
  double fd_delta = 0.0;
  double update_prob = 1.0;
  DampingConfig damping;
};

// Uniform interface over the preconditioner families so the optimizer loop
// does not care which group the factor lives in.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void update(const HvpPair& pair, double mu) = 0;
  virtual Vector apply(const Vector& g) const = 0;  // P g
  virtual Matrix dense() const = 0;
  virtual std::size_t dim() const = 0;
};

struct PsgdState {
  Vector theta;
  Vector momentum;  // sized lazily on first whiten-momentum step
  long step = 0;
};

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;
  bool precond_updated = false;
};

// One optimizer iteration: draw the probe, form the pair for the configured
// mode, update the preconditioner with probability update_prob, then take
// theta <- theta - theta_lr * P g.
StepStats psgd_step(const Problem& problem, PsgdState& state, Preconditioner& precond,
                    const OptimizerConfig& cfg, CounterRng& rng);

}  // namespace hessfit
