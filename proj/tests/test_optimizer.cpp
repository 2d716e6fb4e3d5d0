#include <cmath>

#include "doctest.h"
#include "hessfit/precond_adapters.hpp"
#include "hessfit/problems.hpp"
#include "oracles.hpp"

using namespace hessfit;

namespace {

Matrix random_spd(std::size_t n, CounterRng& rng, double shift = 0.5) {
  Matrix a(n, n);
  for (double& x : a.data()) x = rng.normal();
  Matrix s = transpose(a) * a;
  s *= 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += shift;
  return s;
}

// Frozen preconditioner for plain-SGD comparisons.
class FrozenPrecond final : public Preconditioner {
 public:
  explicit FrozenPrecond(Matrix p) : p_(std::move(p)) {}
  void update(const HvpPair&, double) override {}
  Vector apply(const Vector& g) const override { return matvec(p_, g); }
  Matrix dense() const override { return p_; }
  std::size_t dim() const override { return p_.rows(); }

 private:
  Matrix p_;
};

}  // namespace

TEST_CASE("fd_hvp is exact on quadratics and zero for zero probes") {
  CounterRng rng(3);
  const Matrix h = random_spd(5, rng);
  Problem p = quadratic_problem(h);
  p.hvp = nullptr;  // force the finite-difference path
  const Vector theta = rng.normal_vector(5);
  const Vector v = rng.normal_vector(5);
  const Vector hv = fd_hvp(p, theta, v, 1e-4);
  const Vector exact = matvec(h, v);
  for (int i = 0; i < 5; ++i) CHECK(hv[i] == doctest::Approx(exact[i]).epsilon(1e-9));

  const Vector zero = fd_hvp(p, theta, Vector(5, 0.0), 1e-4);
  for (double x : zero) CHECK(x == doctest::Approx(0.0));
  CHECK_THROWS_AS(fd_hvp(p, theta, v, 0.0), InvalidArgumentError);
}

TEST_CASE("init_scale: hand values and the degenerate branch") {
  CHECK(init_scale({2, 0, 0, 0}).scale == doctest::Approx(1.0));
  // h'h / n = 16 -> 0.5.
  CHECK(init_scale({4, 4, 4, 4}).scale == doctest::Approx(std::pow(16.0, -0.25)));
  CHECK(init_scale({4, 4, 4, 4}).scale == doctest::Approx(0.5));
  const InitScale z = init_scale({0, 0});
  CHECK(z.scale == 1.0);
  CHECK(z.degenerate);
}

TEST_CASE("trd_problem: hand case 1x1x1 and exact factorization") {
  Tensor3 t(1, 1, 1);
  t.at(0, 0, 0) = 2.0;
  const Problem p = trd_problem(t, 1);
  CHECK(p.dim == 3);
  // x = y = z = 1: recon = 1, loss = 1, dloss/dx = -2.
  const Vector theta{1, 1, 1};
  CHECK(p.loss(theta) == doctest::Approx(1.0));
  const Vector g = p.grad(theta);
  CHECK(g[0] == doctest::Approx(-2.0));
  CHECK(g[1] == doctest::Approx(-2.0));
  CHECK(g[2] == doctest::Approx(-2.0));

  // Planted instance evaluated at its own factors: zero loss and gradient.
  CounterRng rng(5);
  Matrix a(2, 3), b(2, 4), c(2, 5);
  for (double& x : a.data()) x = rng.normal();
  for (double& x : b.data()) x = rng.normal();
  for (double& x : c.data()) x = rng.normal();
  Tensor3 tau(3, 4, 5);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t k = 0; k < 5; ++k) tau.at(i, j, k) += a(r, i) * b(r, j) * c(r, k);
      }
    }
  }
  const Problem planted = trd_problem(tau, 2);
  Vector exact;
  for (std::size_t r = 0; r < 2; ++r) for (std::size_t i = 0; i < 3; ++i) exact.push_back(a(r, i));
  for (std::size_t r = 0; r < 2; ++r) for (std::size_t j = 0; j < 4; ++j) exact.push_back(b(r, j));
  for (std::size_t r = 0; r < 2; ++r) for (std::size_t k = 0; k < 5; ++k) exact.push_back(c(r, k));
  CHECK(planted.loss(exact) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(norm2(planted.grad(exact)) == doctest::Approx(0.0).epsilon(1e-10));

  CHECK_THROWS_AS(trd_problem(tau, 0), InvalidArgumentError);
}

TEST_CASE("trd_problem gradient matches finite differences of the loss") {
  CounterRng rng(7);
  Tensor3 tau = planted_trd_tensor(4, 5, 6, 3, rng);
  const Problem p = trd_problem(tau, 3);
  Vector theta = rng.normal_vector(p.dim);
  const Vector g = p.grad(theta);
  const double delta = 1e-6;
  for (std::size_t i = 0; i < p.dim; i += 7) {
    Vector plus = theta, minus = theta;
    plus[i] += delta;
    minus[i] -= delta;
    const double fd = (p.loss(plus) - p.loss(minus)) / (2 * delta);
    CHECK(fd == doctest::Approx(g[i]).epsilon(1e-5));
  }
  // Fused path agrees with the separate ones.
  const auto lg = p.loss_grad(theta);
  CHECK(lg.first == doctest::Approx(p.loss(theta)));
  for (std::size_t i = 0; i < p.dim; i += 11) CHECK(lg.second[i] == doctest::Approx(g[i]));
}

TEST_CASE("psgd_step with a frozen identity preconditioner is plain SGD") {
  CounterRng rng(11);
  const Matrix h = random_spd(4, rng);
  const Problem p = quadratic_problem(h);
  OptimizerConfig cfg;
  cfg.theta_lr = 0.05;
  cfg.update_prob = 1.0;

  PsgdState state;
  state.theta = rng.normal_vector(4);
  Vector manual = state.theta;
  FrozenPrecond eye(Matrix::identity(4));
  CounterRng opt_rng(99);
  for (int t = 0; t < 25; ++t) {
    psgd_step(p, state, eye, cfg, opt_rng);
    const Vector g = matvec(h, manual);
    for (int i = 0; i < 4; ++i) manual[i] -= cfg.theta_lr * g[i];
    for (int i = 0; i < 4; ++i) CHECK(state.theta[i] == doctest::Approx(manual[i]).epsilon(1e-14));
  }
}

TEST_CASE("psgd_step: update_prob = 0 freezes the preconditioner") {
  CounterRng rng(13);
  const Matrix h = random_spd(4, rng);
  const Problem p = quadratic_problem(h);
  OptimizerConfig cfg;
  cfg.theta_lr = 0.02;
  cfg.update_prob = 0.0;
  DensePrecond precond(DenseQState(Matrix::identity(4)));
  const Matrix before = precond.dense();
  PsgdState state;
  state.theta = rng.normal_vector(4);
  CounterRng opt_rng(1);
  for (int t = 0; t < 20; ++t) {
    const StepStats stats = psgd_step(p, state, precond, cfg, opt_rng);
    CHECK_FALSE(stats.precond_updated);
  }
  CHECK(frobenius_distance(precond.dense(), before) == 0.0);
}

TEST_CASE("psgd on a strongly convex quadratic descends after lock-on") {
  CounterRng rng(17);
  const Matrix h = random_spd(6, rng, 0.3);
  const Problem p = quadratic_problem(h);
  OptimizerConfig cfg;
  cfg.theta_lr = 0.5;
  cfg.precond_lr = 1.0;
  DensePrecond precond(DenseQState(Matrix::identity(6)));
  PsgdState state;
  state.theta = rng.normal_vector(6);
  CounterRng opt_rng(4);

  // Let the fitter lock on, then require monotone descent.
  double prev = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 3000; ++t) {
    const StepStats stats = psgd_step(p, state, precond, cfg, opt_rng);
    if (t >= 500) {
      CHECK(stats.loss <= prev + 1e-12);
      prev = stats.loss;
    }
  }
  CHECK(p.loss(state.theta) < 1e-12);
}

TEST_CASE("whiten-grad mode drives P toward (E[gg'])^{-1/2}") {
  CounterRng rng(19);
  const Matrix h = random_spd(5, rng, 0.4);
  // Synthetic gradient stream g = H z with z fresh normal: E[gg'] = H^2.
  auto stream_rng = std::make_shared<CounterRng>(777);
  Problem p;
  p.dim = 5;
  p.loss = [](const Vector&) { return 0.0; };
  auto hp = std::make_shared<Matrix>(h);
  p.grad = [hp, stream_rng](const Vector&) {
    return matvec(*hp, stream_rng->normal_vector(5));
  };

  OptimizerConfig cfg;
  cfg.mode = PsgdMode::kWhitenGrad;
  cfg.theta_lr = 1e-12;  // hold theta effectively still
  cfg.precond_lr = 1.0;
  // beta = 1 so the running normalizer damps the gradient-whitening noise;
  // a short annealed tail then settles the steady-state error.
  DensePrecond precond(DenseQState(Matrix::identity(5), 1.0));
  PsgdState state;
  state.theta = Vector(5, 0.0);
  CounterRng opt_rng(5);
  for (int t = 0; t < 80000; ++t) psgd_step(p, state, precond, cfg, opt_rng);
  cfg.precond_lr = 0.1;
  for (int t = 0; t < 40000; ++t) psgd_step(p, state, precond, cfg, opt_rng);

  const Matrix target = oracles::spd_power(h * h, -0.5);
  const Matrix fitted = precond.dense();
  CHECK(frobenius_distance(fitted, target) <= 0.08 * frobenius_norm(target));
}

TEST_CASE("momentum variance: cov(m) (1+beta)/(1-beta) recovers cov(g)") {
  CounterRng rng(23);
  const double beta = 0.9;
  const Vector sd{1.0, 2.0, 0.5};
  Problem p;
  p.dim = 3;
  p.loss = [](const Vector&) { return 0.0; };
  auto stream_rng = std::make_shared<CounterRng>(31);
  p.grad = [stream_rng, sd](const Vector&) {
    Vector g(3);
    for (int i = 0; i < 3; ++i) g[i] = sd[i] * stream_rng->normal();
    return g;
  };

  OptimizerConfig cfg;
  cfg.mode = PsgdMode::kWhitenMomentum;
  cfg.momentum_beta = beta;
  cfg.theta_lr = 1e-12;
  cfg.precond_lr = 0.01;
  DiagPrecond precond(DiagonalQ(Vector(3, 1.0)));
  PsgdState state;
  state.theta = Vector(3, 0.0);
  CounterRng opt_rng(6);

  Vector second(3, 0.0);
  const int burn = 500, samples = 40000;
  for (int t = 0; t < burn + samples; ++t) {
    psgd_step(p, state, precond, cfg, opt_rng);
    if (t >= burn) {
      for (int i = 0; i < 3; ++i) second[i] += state.momentum[i] * state.momentum[i];
    }
  }
  for (int i = 0; i < 3; ++i) {
    const double var_m = second[i] / samples;
    const double recovered = var_m * (1 + beta) / (1 - beta);
    CHECK(recovered == doctest::Approx(sd[i] * sd[i]).epsilon(0.10));
  }
}
