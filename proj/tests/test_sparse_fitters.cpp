#include <cmath>

#include "doctest.h"
#include "hessfit/sparse_fitters.hpp"
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

}  // namespace

TEST_CASE("uvec/vec: column-major reshape round trip") {
  const Vector x{1, 2, 3, 4, 5, 6};
  const Matrix m = uvec(x, 2, 3);
  CHECK(m(0, 0) == 1);
  CHECK(m(1, 0) == 2);
  CHECK(m(0, 1) == 3);
  CHECK(m(1, 2) == 6);
  const Vector back = vec(m);
  for (int i = 0; i < 6; ++i) CHECK(back[i] == x[i]);
}

TEST_CASE("diag_step: no-op at h = v, scalar 2/17, zero clamp") {
  DiagonalQ state(Vector{1, 1, 1}, 0.0);
  const DiagonalQ kept = diag_step(state, {{1, 2, 3}, {1, 2, 3}}, 1.0);
  for (double x : kept.q) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));

  DiagonalQ scalar(Vector{1.0}, 0.0);
  const DiagonalQ out = diag_step(scalar, {{1}, {4}}, 1.0);
  CHECK(out.q[0] == doctest::Approx(2.0 / 17.0).epsilon(1e-15));

  CHECK_THROWS_AS(DiagonalQ(Vector{1, 0}, 0.0), InvalidArgumentError);
}

TEST_CASE("diag_step: equals independent scalar group recursions per coordinate") {
  CounterRng rng(3);
  const std::size_t n = 4;
  const Vector lam{0.2, 0.9, 1.7, 3.0};  // diagonal curvature
  DiagonalQ state(Vector(n, 1.0), 0.0);
  Vector scalar_q(n, 1.0);
  for (int t = 0; t < 500; ++t) {
    const Vector v = rng.normal_vector(n);
    Vector h(n);
    for (std::size_t i = 0; i < n; ++i) h[i] = lam[i] * v[i];
    state = diag_step(std::move(state), {v, h}, 1.0);
    // Oracle: same update with the vector-level tracker (max over coordinates).
    double ell = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = scalar_q[i] * h[i];
      const double b = v[i] / scalar_q[i];
      ell = std::max(ell, a * a + b * b);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double a = scalar_q[i] * h[i];
      const double b = v[i] / scalar_q[i];
      scalar_q[i] -= (1.0 / ell) * (a * a - b * b) * scalar_q[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(state.q[i] == doctest::Approx(scalar_q[i]).epsilon(1e-14));
    }
  }
  // The limit is the per-coordinate inverse square root of the curvature.
  for (int t = 0; t < 10000; ++t) {
    const Vector v = rng.normal_vector(n);
    Vector h(n);
    for (std::size_t i = 0; i < n; ++i) h[i] = lam[i] * v[i];
    state = diag_step(std::move(state), {v, h}, 1.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(state.q[i] * state.q[i] * lam[i] == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("kron_step: no-op when h = v at identity factors") {
  KronQ state(Matrix::identity(2), Matrix::identity(3), 0.0, KronMode::kQr);
  const Vector x{1, 2, 3, 4, 5, 6};
  const KronQ kept = kron_step(state, {x, x}, 1.0);
  CHECK(frobenius_distance(kept.q1, Matrix::identity(2)) < 1e-14);
  CHECK(frobenius_distance(kept.q2, Matrix::identity(3)) < 1e-14);
}

TEST_CASE("kron_step at m1 = m2 = 1 multiplies both factors by the scalar group step") {
  CounterRng rng(5);
  KronQ state(Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0}), 0.0, KronMode::kQr);
  for (int t = 0; t < 50; ++t) {
    const double v = rng.normal();
    const double h = 2.5 * v;
    // Scalar oracle from the current state: with composite Q = q1 q2, both
    // factors shrink by the same multiplier 1 - (a^2 - b^2)/(a^2 + b^2),
    // which is exactly the scalar general-linear-group step.
    const double q1 = state.q1(0, 0), q2 = state.q2(0, 0);
    const double a = q1 * q2 * h;
    const double b = v / (q1 * q2);
    const double mult = 1.0 - (a * a - b * b) / (a * a + b * b);
    state = kron_step(std::move(state), {{v}, {h}}, 1.0);
    CHECK(state.q1(0, 0) == doctest::Approx(mult * q1).epsilon(1e-12));
    CHECK(state.q2(0, 0) == doctest::Approx(mult * q2).epsilon(1e-12));
  }
}

TEST_CASE("kron_step: per-sample fixed point for Kronecker-structured curvature") {
  CounterRng rng(7);
  const Matrix h1 = random_spd(3, rng);
  const Matrix h2 = random_spd(3, rng);
  // Q1'Q1 = H1^{-1}, Q2'Q2 = H2^{-1} gives P = (H2 (x) H1)^{-1}.
  KronQ state(oracles::spd_power(h1, -0.5), oracles::spd_power(h2, -0.5), 0.0, KronMode::kQr);
  const Matrix q1_start = state.q1, q2_start = state.q2;
  for (int t = 0; t < 24; ++t) {
    const Vector v = rng.normal_vector(9);
    // h = (H2 (x) H1) v = vec(H1 uvec(v) H2').
    const Vector h = vec((h1 * uvec(v, 3, 3)) * transpose(h2));
    state = kron_step(std::move(state), {v, h}, 1.0);
  }
  CHECK(frobenius_distance(state.q1, q1_start) <= 1e-11 * frobenius_norm(q1_start));
  CHECK(frobenius_distance(state.q2, q2_start) <= 1e-11 * frobenius_norm(q2_start));
}

TEST_CASE("kron_step dense oracle: the implied dense factor follows the factored update") {
  CounterRng rng(11);
  const Matrix h1 = random_spd(3, rng, 0.8);
  const Matrix h2 = random_spd(3, rng, 0.8);
  KronQ state(Matrix::identity(3), Matrix::identity(3), 0.0, KronMode::kQr);
  for (int t = 0; t < 40; ++t) {
    const Vector v = rng.normal_vector(9);
    const Vector h = vec((h1 * uvec(v, 3, 3)) * transpose(h2));

    // Dense oracle for one step, computed with plain dense algebra.
    const Matrix hm = uvec(h, 3, 3);
    const Matrix vm = uvec(v, 3, 3);
    const Matrix a = (state.q1 * hm) * transpose(state.q2);
    const Matrix b = (transpose(lu_inverse(state.q2)) * transpose(vm)) * lu_inverse(state.q1);
    KronQ stepped = kron_step(state, {v, h}, 1.0);
    const double c1 = 1.0 / stepped.tracker1.value;
    const double c2 = 1.0 / stepped.tracker2.value;
    Matrix m1 = Matrix::identity(3);
    m1 -= c1 * (a * transpose(a) - transpose(b) * b);
    Matrix m2 = Matrix::identity(3);
    m2 -= c2 * (transpose(a) * a - b * transpose(b));
    const Matrix q1_oracle = qr_upper_factor(m1) * state.q1;
    const Matrix q2_oracle = qr_upper_factor(m2) * state.q2;

    // Mixed product: kron(R2 Q2, R1 Q1) must equal the updated dense factor.
    KronQ oracle_state(q1_oracle, q2_oracle);
    CHECK(frobenius_distance(stepped.dense_q(), oracle_state.dense_q()) <=
          1e-12 * frobenius_norm(oracle_state.dense_q()));
    state = std::move(stepped);
  }
}

TEST_CASE("kron_step: inverse-free mode fixed point") {
  CounterRng rng(13);
  const Matrix h1 = random_spd(3, rng);
  const Matrix h2 = random_spd(3, rng);
  KronQ state(oracles::spd_power(h1, -0.5), oracles::spd_power(h2, -0.5), 0.0,
              KronMode::kInverseFree);
  const Matrix q1_start = state.q1;
  for (int t = 0; t < 16; ++t) {
    const Vector v = rng.normal_vector(9);
    const Vector h = vec((h1 * uvec(v, 3, 3)) * transpose(h2));
    state = kron_step(std::move(state), {v, h}, 0.1);
  }
  CHECK(frobenius_distance(state.q1, q1_start) <= 1e-11 * frobenius_norm(q1_start));
}

TEST_CASE("lra_step: r = 0 matches diag_step given matched normalizers") {
  CounterRng rng(17);
  const std::size_t n = 5;
  // Pin both trackers to the same constant so the two formulas coincide.
  LraQ lra = LraQ::scaled_identity(n, 0, 1.0);
  lra.tracker_d = LipschitzTracker(1.0, 50.0);
  DiagonalQ diag(Vector(n, 1.0), 0.0);
  diag.tracker = LipschitzTracker(1.0, 50.0);
  for (int t = 0; t < 100; ++t) {
    const Vector v = rng.normal_vector(n);
    Vector h(n);
    for (std::size_t i = 0; i < n; ++i) h[i] = (0.5 + 0.3 * static_cast<double>(i)) * v[i];
    lra = lra_step(std::move(lra), {v, h}, 1.0);
    diag = diag_step(std::move(diag), {v, h}, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(lra.d[i] == doctest::Approx(diag.q[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("lra_step: scalar n = 1, r = 0 reproduces 2/17") {
  LraQ state = LraQ::scaled_identity(1, 0, 1.0);
  state = lra_step(std::move(state), {{1}, {4}}, 1.0);
  CHECK(state.d[0] == doctest::Approx(2.0 / 17.0).epsilon(1e-15));
}

TEST_CASE("lra_step: per-sample fixed point at a representable optimum") {
  CounterRng rng(19);
  const std::size_t n = 8, r = 1;
  LraQ state = LraQ::random_init(n, r, 1.0, rng);
  for (std::size_t i = 0; i < n; ++i) state.d[i] = 0.5 + rng.uniform();
  // Construct the curvature this factor solves exactly: H = (Q'Q)^{-1}.
  const Matrix h = oracles::spd_power(symmetrize(state.dense_preconditioner()), -1.0);
  const Vector d0 = state.d;
  const Matrix u0 = state.u, v0 = state.v;
  for (int t = 0; t < 50; ++t) {
    const Vector v = rng.normal_vector(n);
    state = lra_step(std::move(state), {v, matvec(h, v)}, 1.0);
  }
  double drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) drift = std::max(drift, std::fabs(state.d[i] - d0[i]));
  CHECK(drift <= 1e-11);
  CHECK(frobenius_distance(state.u, u0) <= 1e-10 * (1.0 + frobenius_norm(u0)));
  CHECK(frobenius_distance(state.v, v0) <= 1e-10 * (1.0 + frobenius_norm(v0)));
}

TEST_CASE("lra_step: fits a diagonal-plus-low-rank curvature") {
  CounterRng rng(23);
  const std::size_t n = 12, r = 2;
  // H = D + w w' with modest conditioning.
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) h(i, i) = 0.5 + 0.2 * static_cast<double>(i);
  const Vector w = rng.normal_vector(n);
  h.add_outer(0.5, w, w);

  LraQ state = LraQ::random_init(n, r, 1.0, rng);
  long t = 0;
  for (; t < 120000; ++t) {
    const Vector v = rng.normal_vector(n);
    state = lra_step(std::move(state), {v, matvec(h, v)}, 0.2);
    if (t % 100 == 99) state = lra_balance(std::move(state), 0.25);
    if (t % 2000 == 0) {
      const Matrix ph = state.dense_preconditioner() * h;
      if (frobenius_distance(ph, Matrix::identity(n)) / std::sqrt(static_cast<double>(n)) < 1e-6) {
        break;
      }
    }
  }
  const Matrix ph = state.dense_preconditioner() * h;
  CHECK(frobenius_distance(ph, Matrix::identity(n)) / std::sqrt(static_cast<double>(n)) <= 1e-6);
  CHECK(std::fabs(state.core_determinant()) > 1e-12);
}

TEST_CASE("lra_step: group-exit guard") {
  // Build u, v with det(I + V'U) = 0: r = 1, u = -v / (v'v).
  const std::size_t n = 4;
  Matrix u(n, 1), v(n, 1);
  const Vector w{1, 2, 3, 4};
  const double wn = norm2_squared(w);
  for (std::size_t i = 0; i < n; ++i) {
    v(i, 0) = w[i];
    u(i, 0) = -w[i] / wn;
  }
  LraQ bad(Vector(n, 1.0), u, v);
  CHECK_THROWS_AS(lra_step(std::move(bad), {{1, 1, 1, 1}, {1, 1, 1, 1}}, 1.0), SingularError);
}

TEST_CASE("lra_balance: scalar hand case and invariants") {
  // U = [1], V = [0]: E = 1, mu = 0.25 -> U' = 1 - 0.25 + 0.03125.
  LraQ state(Vector{1.0}, Matrix(1, 1, {1.0}), Matrix(1, 1, {0.0}));
  state = lra_balance(std::move(state), 0.25);
  CHECK(state.u(0, 0) == doctest::Approx(0.78125).epsilon(1e-15));
  CHECK(state.v(0, 0) == 0.0);

  CHECK_THROWS_AS(lra_balance(LraQ(Vector{1.0}, Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0})), 0.3),
                  InvalidArgumentError);
}

TEST_CASE("lra_balance: product drift bound, norm decrease, monotone mismatch") {
  CounterRng rng(29);
  const std::size_t n = 10, r = 3;
  Matrix u(n, r), v(n, r);
  for (double& x : u.data()) x = rng.normal();
  for (double& x : v.data()) x = 0.2 * rng.normal();
  LraQ state(Vector(n, 1.0), u, v);

  const double mu = 0.25;
  double prev_mismatch = 2.0;
  for (int round = 0; round < 160; ++round) {
    Matrix utu = transpose(state.u) * state.u;
    Matrix vtv = transpose(state.v) * state.v;
    const double total = utu.trace() + vtv.trace();
    const double mismatch = std::fabs(utu.trace() - vtv.trace()) / total;
    CHECK(mismatch <= prev_mismatch + 1e-12);
    prev_mismatch = mismatch;

    const Matrix product = state.u * transpose(state.v);
    const double norms = utu.trace() + vtv.trace();
    state = lra_balance(std::move(state), mu);
    const Matrix drift = state.u * transpose(state.v) - product;
    CHECK(oracles::sigma_max(drift) <=
          0.25 * std::pow(mu, 4) * oracles::sigma_max(product) + 1e-15);
    const double norms_after =
        (transpose(state.u) * state.u).trace() + (transpose(state.v) * state.v).trace();
    CHECK(norms_after <= norms + 1e-12);
  }
  CHECK(prev_mismatch < 1e-3);
}

TEST_CASE("precond_grad: identity factors leave the gradient unchanged") {
  const Vector g{1, -2, 3, -4, 5, -6};
  DiagonalQ diag(Vector(6, 1.0));
  const Vector gd = precond_grad(diag, g);
  KronQ kron(Matrix::identity(2), Matrix::identity(3));
  const Vector gk = precond_grad(kron, g);
  LraQ lra = LraQ::scaled_identity(6, 2, 1.0);
  const Vector gl = precond_grad(lra, g);
  for (int i = 0; i < 6; ++i) {
    CHECK(gd[i] == doctest::Approx(g[i]));
    CHECK(gk[i] == doctest::Approx(g[i]));
    CHECK(gl[i] == doctest::Approx(g[i]));
  }
}

TEST_CASE("precond_grad matches the dense Q'Q g oracle for every sparse form") {
  CounterRng rng(31);
  // Diagonal.
  DiagonalQ diag(Vector{0.5, -1.5, 2.0, 0.25});
  // Kronecker 2x3.
  Matrix q1(2, 2), q2(3, 3);
  for (double& x : q1.data()) x = rng.normal();
  for (double& x : q2.data()) x = rng.normal();
  KronQ kron(q1, q2);
  // LRA.
  LraQ lra = LraQ::random_init(6, 2, 1.0, rng);
  for (std::size_t i = 0; i < 6; ++i) lra.d[i] = 0.3 + rng.uniform();
  for (double& x : lra.u.data()) x = rng.normal();
  for (double& x : lra.v.data()) x = 0.3 * rng.normal();

  const Vector g4 = rng.normal_vector(4);
  const Vector g6 = rng.normal_vector(6);

  const Vector dd = matvec(diag.dense_preconditioner(), g4);
  const Vector ds = precond_grad(diag, g4);
  for (int i = 0; i < 4; ++i) CHECK(ds[i] == doctest::Approx(dd[i]).epsilon(1e-12));

  const Vector kd = matvec(kron.dense_preconditioner(), g6);
  const Vector ks = precond_grad(kron, g6);
  for (int i = 0; i < 6; ++i) CHECK(ks[i] == doctest::Approx(kd[i]).epsilon(1e-12));

  const Vector ld = matvec(lra.dense_preconditioner(), g6);
  const Vector ls = precond_grad(lra, g6);
  for (int i = 0; i < 6; ++i) CHECK(ls[i] == doctest::Approx(ld[i]).epsilon(1e-12));
}

TEST_CASE("lra inverse application agrees with the dense inverse") {
  CounterRng rng(37);
  LraQ lra = LraQ::random_init(7, 3, 1.0, rng);
  for (std::size_t i = 0; i < 7; ++i) lra.d[i] = 0.4 + rng.uniform();
  for (double& x : lra.u.data()) x = rng.normal() * 0.5;
  for (double& x : lra.v.data()) x = rng.normal() * 0.5;
  const Matrix dense_q = lra.dense_q();
  const Vector x = rng.normal_vector(7);
  const Vector qinv_t = lra.apply_qinv_t(x);
  const Vector oracle = lu_solve(lu_factor(transpose(dense_q)), x);
  for (int i = 0; i < 7; ++i) CHECK(qinv_t[i] == doctest::Approx(oracle[i]).epsilon(1e-10));
  const Vector qinv = lra.apply_qinv(x);
  const Vector oracle2 = lu_solve(lu_factor(dense_q), x);
  for (int i = 0; i < 7; ++i) CHECK(qinv[i] == doctest::Approx(oracle2[i]).epsilon(1e-10));
}
