#include "hessfit/sparse_fitters.hpp"

#include <cmath>
#include <string>

namespace hessfit {

namespace {

constexpr double kZeroClamp = 1e-30;

double clamp_away_from_zero(double x) {
  if (std::fabs(x) >= kZeroClamp) return x;
  return x < 0.0 ? -kZeroClamp : kZeroClamp;
}

// r x r core I + V'U.
Matrix lra_core(const Matrix& u, const Matrix& v) {
  const std::size_t r = u.cols();
  Matrix k = Matrix::identity(r);
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = 0; b < r; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < u.rows(); ++i) acc += v(i, a) * u(i, b);
      k(a, b) += acc;
    }
  }
  return k;
}

}  // namespace

DiagonalQ::DiagonalQ(Vector q0, double beta) : q(std::move(q0)), tracker(beta) {
  for (double x : q) {
    if (x == 0.0) throw InvalidArgumentError("DiagonalQ: zero entry in q0");
  }
}

Matrix DiagonalQ::dense_preconditioner() const {
  Vector p(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) p[i] = q[i] * q[i];
  return Matrix::from_diag(p);
}

DiagonalQ diag_step(DiagonalQ state, const HvpPair& pair, double mu) {
  const std::size_t n = state.q.size();
  if (pair.v.size() != n || pair.h.size() != n) {
    throw DimensionError("diag_step: pair dimension mismatch");
  }
  if (!(mu > 0.0 && mu <= 2.0)) throw InvalidArgumentError("diag_step: mu must be in (0, 2]");
  double ell = 0.0;
  Vector qh(n), vq(n);
  for (std::size_t i = 0; i < n; ++i) {
    qh[i] = state.q[i] * pair.h[i];
    vq[i] = pair.v[i] / state.q[i];
    ell = std::max(ell, qh[i] * qh[i] + vq[i] * vq[i]);
  }
  if (ell == 0.0) return state;  // all-zero pair carries no information
  const double c = mu / state.tracker.update(ell);
  for (std::size_t i = 0; i < n; ++i) {
    state.q[i] -= c * (qh[i] * qh[i] - vq[i] * vq[i]) * state.q[i];
    state.q[i] = clamp_away_from_zero(state.q[i]);
  }
  return state;
}

KronQ::KronQ(Matrix q1_initial, Matrix q2_initial, double beta, KronMode mode_)
    : q1(std::move(q1_initial)), q2(std::move(q2_initial)), tracker1(beta), tracker2(beta),
      mode(mode_) {
  detail::require_square(q1, "KronQ");
  detail::require_square(q2, "KronQ");
}

Matrix KronQ::dense_q() const {
  const std::size_t m1 = q1.rows(), m2 = q2.rows();
  Matrix q(m1 * m2, m1 * m2);
  for (std::size_t a = 0; a < m2; ++a) {
    for (std::size_t b = 0; b < m2; ++b) {
      const double s = q2(a, b);
      if (s == 0.0) continue;
      for (std::size_t i = 0; i < m1; ++i) {
        for (std::size_t j = 0; j < m1; ++j) {
          q(a * m1 + i, b * m1 + j) = s * q1(i, j);
        }
      }
    }
  }
  return q;
}

Matrix KronQ::dense_preconditioner() const {
  const Matrix q = dense_q();
  return transpose(q) * q;
}

KronQ kron_step(KronQ state, const HvpPair& pair, double mu) {
  const std::size_t m1 = state.q1.rows(), m2 = state.q2.rows();
  if (pair.v.size() != m1 * m2 || pair.h.size() != m1 * m2) {
    throw DimensionError("kron_step: pair does not reshape to " + std::to_string(m1) + "x" +
                         std::to_string(m2));
  }
  const double max_mu = state.mode == KronMode::kQr ? 2.0 : 0.1;
  if (!(mu > 0.0 && mu <= max_mu)) {
    throw InvalidArgumentError("kron_step: mu out of range for this mode");
  }

  const Matrix hm = uvec(pair.h, m1, m2);
  const Matrix vm = uvec(pair.v, m1, m2);

  Matrix a, b;  // a: m1 x m2, b: m2 x m1
  if (state.mode == KronMode::kQr) {
    a = (state.q1 * hm) * transpose(state.q2);
    const Matrix q1_inv = lu_inverse(state.q1);
    const Matrix q2_inv = lu_inverse(state.q2);
    b = (transpose(q2_inv) * transpose(vm)) * q1_inv;
  } else {
    a = ((transpose(state.q1) * state.q1) * hm) * (transpose(state.q2) * state.q2);
    b = transpose(vm);
  }

  const Matrix aat = a * transpose(a);
  const Matrix btb = transpose(b) * b;
  const Matrix ata = transpose(a) * a;
  const Matrix bbt = b * transpose(b);

  // Fixed probe stream keeps the step a pure function of its inputs.
  CounterRng rng1(0x6B726F6E31ULL), rng2(0x6B726F6E32ULL);
  const double ell1 = estimate_spectral_norm(aat + btb, std::min<std::size_t>(32, m1), 4, rng1);
  const double ell2 = estimate_spectral_norm(ata + bbt, std::min<std::size_t>(32, m2), 4, rng2);
  if (ell1 == 0.0 || ell2 == 0.0) return state;  // all-zero pair
  const double c1 = mu / state.tracker1.update(ell1);
  const double c2 = mu / state.tracker2.update(ell2);

  if (state.mode == KronMode::kQr) {
    Matrix m_1 = Matrix::identity(m1);
    m_1 -= c1 * (aat - btb);
    Matrix m_2 = Matrix::identity(m2);
    m_2 -= c2 * (ata - bbt);
    state.q1 = qr_upper_factor(m_1) * state.q1;
    state.q2 = qr_upper_factor(m_2) * state.q2;
  } else {
    state.q1 -= c1 * (state.q1 * (aat - btb));
    state.q2 -= c2 * (state.q2 * (ata - bbt));
  }
  return state;
}

LraQ::LraQ(Vector d0, Matrix u0, Matrix v0, double beta)
    : d(std::move(d0)), u(std::move(u0)), v(std::move(v0)), tracker_d(beta), tracker_u(beta),
      tracker_v(beta) {
  if (u.cols() != v.cols() || u.rows() != d.size() || v.rows() != d.size()) {
    throw DimensionError("LraQ: inconsistent shapes");
  }
  for (double x : d) {
    if (x == 0.0) throw InvalidArgumentError("LraQ: zero entry in d0");
  }
}

LraQ LraQ::scaled_identity(std::size_t n, std::size_t r, double scale, double beta) {
  if (r > n) throw InvalidArgumentError("LraQ: rank exceeds dimension");
  return LraQ(Vector(n, scale), Matrix(n, r), Matrix(n, r), beta);
}

LraQ LraQ::random_init(std::size_t n, std::size_t r, double scale, CounterRng& rng, double beta) {
  if (r > n) throw InvalidArgumentError("LraQ: rank exceeds dimension");
  const double sd = 0.1 / std::sqrt(static_cast<double>(n));
  Matrix u0(n, r), v0(n, r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < r; ++a) {
      u0(i, a) = sd * rng.normal();
      v0(i, a) = sd * rng.normal();
    }
  }
  return LraQ(Vector(n, scale), std::move(u0), std::move(v0), beta);
}

Vector LraQ::apply_q(const Vector& x) const {
  if (x.size() != d.size()) throw DimensionError("LraQ::apply_q: length mismatch");
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = d[i] * x[i];
  if (rank() == 0) return y;
  const Vector t = matvec_t(v, y);
  return vadd(y, matvec(u, t));
}

Vector LraQ::apply_qt(const Vector& x) const {
  if (x.size() != d.size()) throw DimensionError("LraQ::apply_qt: length mismatch");
  Vector y = x;
  if (rank() > 0) {
    const Vector t = matvec_t(u, x);
    y = vadd(x, matvec(v, t));
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= d[i];
  return y;
}

Vector LraQ::apply_qinv_t(const Vector& x) const {
  if (x.size() != d.size()) throw DimensionError("LraQ::apply_qinv_t: length mismatch");
  Vector w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = x[i] / d[i];
  if (rank() == 0) return w;
  // (I + VU')^{-1} = I - V (I + U'V)^{-1} U'
  const Matrix core_t = transpose(lra_core(u, v));  // I + U'V
  const Vector t = lu_solve(lu_factor(core_t), matvec_t(u, w));
  return vsub(w, matvec(v, t));
}

Vector LraQ::apply_qinv(const Vector& x) const {
  if (x.size() != d.size()) throw DimensionError("LraQ::apply_qinv: length mismatch");
  Vector y = x;
  if (rank() > 0) {
    // (I + UV')^{-1} = I - U (I + V'U)^{-1} V'
    const Matrix core = lra_core(u, v);
    const Vector t = lu_solve(lu_factor(core), matvec_t(v, x));
    y = vsub(x, matvec(u, t));
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= d[i];
  return y;
}

double LraQ::core_determinant() const {
  if (rank() == 0) return 1.0;
  return lu_determinant(lra_core(u, v));
}

Matrix LraQ::dense_q() const {
  Matrix q = Matrix::from_diag(d);
  if (rank() > 0) {
    // (I + UV') diag(d): add U (V' diag(d))
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t j = 0; j < d.size(); ++j) {
        double acc = 0.0;
        for (std::size_t a = 0; a < rank(); ++a) acc += u(i, a) * v(j, a);
        q(i, j) += acc * d[j];
      }
    }
  }
  return q;
}

Matrix LraQ::dense_preconditioner() const {
  const Matrix q = dense_q();
  return transpose(q) * q;
}

LraQ lra_step(LraQ state, const HvpPair& pair, double mu) {
  const std::size_t n = state.d.size();
  if (pair.v.size() != n || pair.h.size() != n) {
    throw DimensionError("lra_step: pair dimension mismatch");
  }
  if (!(mu > 0.0 && mu <= 1.0)) throw InvalidArgumentError("lra_step: mu must be in (0, 1]");
  if (state.rank() > 0 && !(std::fabs(state.core_determinant()) >= 1e-12)) {
    throw SingularError("lra_step: I + V'U left the group (determinant ~ 0 or not finite)");
  }

  const Vector a = state.apply_q(pair.h);
  const Vector b = state.apply_qinv_t(pair.v);
  const Vector ph = state.apply_qt(a);        // P h
  const Vector pinv_v = state.apply_qinv(b);  // P^{-1} v

  // Diagonal part.
  double max_hp = 0.0, max_vp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_hp = std::max(max_hp, std::fabs(pair.h[i] * ph[i]));
    max_vp = std::max(max_vp, std::fabs(pair.v[i] * pinv_v[i]));
  }
  if (max_hp + max_vp > 0.0) {
    const double cd = mu / state.tracker_d.update(max_hp + max_vp);
    for (std::size_t i = 0; i < n; ++i) {
      state.d[i] *= 1.0 - cd * (pair.h[i] * ph[i] - pair.v[i] * pinv_v[i]);
      state.d[i] = clamp_away_from_zero(state.d[i]);
    }
  }

  if (state.rank() > 0) {
    if (state.update_u_next) {
      const Vector va = matvec_t(state.v, a);
      const Vector vb = matvec_t(state.v, b);
      const double ell = norm2(a) * norm2(matvec(state.v, va)) +
                         norm2(b) * norm2(matvec(state.v, vb));
      if (ell > 0.0) {
        const double cu = mu / state.tracker_u.update(ell);
        // U <- U - cu (aa' - bb') V (I + V'U)
        const Matrix core = lra_core(state.u, state.v);
        const Vector ka = matvec_t(core, va);
        const Vector kb = matvec_t(core, vb);
        state.u.add_outer(-cu, a, ka);
        state.u.add_outer(cu, b, kb);
      }
    } else {
      const Vector ua = matvec_t(state.u, a);
      const Vector ub = matvec_t(state.u, b);
      const double ell = norm2(a) * norm2(matvec(state.u, ua)) +
                         norm2(b) * norm2(matvec(state.u, ub));
      if (ell > 0.0) {
        const double cv = mu / state.tracker_v.update(ell);
        // V <- V - cv (I + VU') (aa' - bb') U
        Matrix g = Matrix::outer(a, ua);
        g.add_outer(-1.0, b, ub);
        // (I + VU') g = g + V (U' g); U'(aa' - bb')U = ua ua' - ub ub'
        Matrix core_term(state.rank(), state.rank());
        for (std::size_t i = 0; i < state.rank(); ++i) {
          for (std::size_t j = 0; j < state.rank(); ++j) {
            core_term(i, j) = ua[i] * ua[j] - ub[i] * ub[j];
          }
        }
        g += state.v * core_term;
        state.v -= cv * g;
      }
    }
    state.update_u_next = !state.update_u_next;
  }
  return state;
}

LraQ lra_balance(LraQ state, double mu) {
  if (!(mu > 0.0 && mu <= 0.25)) {
    throw InvalidArgumentError("lra_balance: mu must be in (0, 0.25]");
  }
  const std::size_t r = state.rank();
  if (r == 0) return state;
  Matrix utu(r, r), vtv(r, r);
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = 0; b < r; ++b) {
      double su = 0.0, sv = 0.0;
      for (std::size_t i = 0; i < state.u.rows(); ++i) {
        su += state.u(i, a) * state.u(i, b);
        sv += state.v(i, a) * state.v(i, b);
      }
      utu(a, b) = su;
      vtv(a, b) = sv;
    }
  }
  const double total = utu.trace() + vtv.trace();
  if (total <= 0.0) return state;  // U = V = 0
  Matrix e = utu - vtv;
  e *= 1.0 / total;
  const Matrix e2 = e * e;
  Matrix shrink = Matrix::identity(r);
  shrink -= mu * e;
  shrink += 0.5 * mu * mu * e2;
  Matrix grow = Matrix::identity(r);
  grow += mu * e;
  grow += 0.5 * mu * mu * e2;
  state.u = state.u * shrink;
  state.v = state.v * grow;
  return state;
}

Vector precond_grad(const DiagonalQ& state, const Vector& g) {
  if (g.size() != state.q.size()) throw DimensionError("precond_grad: length mismatch");
  Vector out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = state.q[i] * state.q[i] * g[i];
  return out;
}

Vector precond_grad(const KronQ& state, const Vector& g) {
  const std::size_t m1 = state.q1.rows(), m2 = state.q2.rows();
  if (g.size() != m1 * m2) throw DimensionError("precond_grad: length mismatch");
  const Matrix gm = uvec(g, m1, m2);
  // Q g = vec(Q1 G Q2'); Q'(Qg) = vec(Q1' (Q1 G Q2') Q2)
  const Matrix qg = (state.q1 * gm) * transpose(state.q2);
  return vec((transpose(state.q1) * qg) * state.q2);
}

Vector precond_grad(const LraQ& state, const Vector& g) {
  return state.apply_qt(state.apply_q(g));
}

Matrix uvec(const Vector& x, std::size_t m1, std::size_t m2) {
  if (x.size() != m1 * m2) throw DimensionError("uvec: length mismatch");
  Matrix m(m1, m2);
  for (std::size_t j = 0; j < m2; ++j) {
    for (std::size_t i = 0; i < m1; ++i) m(i, j) = x[j * m1 + i];
  }
  return m;
}

Vector vec(const Matrix& x) {
  Vector out(x.rows() * x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) out[j * x.rows() + i] = x(i, j);
  }
  return out;
}

}  // namespace hessfit
