#include "hessfit/optimizer.hpp"

#include <cmath>

namespace hessfit {

Vector fd_hvp(const Problem& problem, const Vector& theta, const Vector& v, double delta) {
  if (!(delta > 0.0)) throw InvalidArgumentError("fd_hvp: delta must be positive");
  if (theta.size() != problem.dim || v.size() != problem.dim) {
    throw DimensionError("fd_hvp: dimension mismatch");
  }
  Vector plus(theta), minus(theta);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    plus[i] += delta * v[i];
    minus[i] -= delta * v[i];
  }
  Vector gp = problem.grad(plus);
  const Vector gm = problem.grad(minus);
  const double inv = 1.0 / (2.0 * delta);
  for (std::size_t i = 0; i < gp.size(); ++i) gp[i] = (gp[i] - gm[i]) * inv;
  return gp;
}

InitScale init_scale(const Vector& h1) {
  const double energy = norm2_squared(h1) / static_cast<double>(h1.size());
  if (!(energy > 0.0)) return {1.0, true};
  return {std::pow(energy, -0.25), false};
}

StepStats psgd_step(const Problem& problem, PsgdState& state, Preconditioner& precond,
                    const OptimizerConfig& cfg, CounterRng& rng) {
  if (state.theta.size() != problem.dim || precond.dim() != problem.dim) {
    throw DimensionError("psgd_step: dimension mismatch");
  }
  if (!(cfg.theta_lr > 0.0) || !(cfg.precond_lr > 0.0)) {
    throw InvalidArgumentError("psgd_step: learning rates must be positive");
  }
  if (cfg.update_prob < 0.0 || cfg.update_prob > 1.0) {
    throw InvalidArgumentError("psgd_step: update_prob must be in [0, 1]");
  }

  StepStats stats;
  Vector g;
  if (problem.loss_grad) {
    auto lg = problem.loss_grad(state.theta);
    stats.loss = lg.first;
    g = std::move(lg.second);
  } else {
    stats.loss = problem.loss(state.theta);
    g = problem.grad(state.theta);
  }
  if (!std::isfinite(stats.loss)) {
    throw DivergenceError("psgd_step: loss is not finite");
  }
  stats.grad_norm = norm2(g);

  const Vector v = rng.normal_vector(problem.dim);
  HvpPair pair;
  switch (cfg.mode) {
    case PsgdMode::kHvp: {
      Vector h;
      if (problem.hvp) {
        h = problem.hvp(state.theta, v);
      } else {
        const double delta =
            cfg.fd_delta > 0.0 ? cfg.fd_delta : 1e-5 * (1.0 + norm_inf(state.theta));
        h = fd_hvp(problem, state.theta, v, delta);
      }
      pair = damp_hvp({v, std::move(h)}, cfg.damping, rng);
      break;
    }
    case PsgdMode::kWhitenGrad:
      pair = {v, g};
      break;
    case PsgdMode::kWhitenMomentum: {
      if (state.momentum.size() != problem.dim) state.momentum.assign(problem.dim, 0.0);
      for (std::size_t i = 0; i < problem.dim; ++i) {
        state.momentum[i] = cfg.momentum_beta * state.momentum[i] +
                            (1.0 - cfg.momentum_beta) * g[i];
      }
      pair = {v, state.momentum};
      break;
    }
  }

  if (rng.uniform() < cfg.update_prob || cfg.update_prob >= 1.0) {
    precond.update(pair, cfg.precond_lr);
    stats.precond_updated = true;
  }

  const Vector pg = precond.apply(g);
  for (std::size_t i = 0; i < problem.dim; ++i) state.theta[i] -= cfg.theta_lr * pg[i];
  ++state.step;
  return stats;
}

}  // namespace hessfit
