#include "hessfit/group_fitters.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hessfit {

namespace {

void require_pair(const HvpPair& pair, std::size_t n, const char* op) {
  if (pair.v.size() != n || pair.h.size() != n) {
    throw DimensionError(std::string(op) + ": pair dimension mismatch");
  }
}

void require_mu(double mu, double max_mu, const char* op) {
  if (!(mu > 0.0 && mu <= max_mu)) {
    throw InvalidArgumentError(std::string(op) + ": mu must be in (0, " + std::to_string(max_mu) +
                               "]");
  }
}

// P h = Q'(Q h) without forming P.
Vector apply_p(const Matrix& q, const Vector& h) { return matvec_t(q, matvec(q, h)); }

constexpr long kInverseDriftCheckInterval = 64;

}  // namespace

double LipschitzTracker::update(double ell) {
  if (!(ell > 0.0)) {
    throw InvalidArgumentError("LipschitzTracker: sample must be positive");
  }
  value = std::max(beta * value + (1.0 - beta) * ell, ell);
  return value;
}

LipschitzTracker tracker_update(LipschitzTracker tracker, double ell) {
  tracker.update(ell);
  return tracker;
}

DenseQState::DenseQState(Matrix q0, double beta) : q_(std::move(q0)), tracker_(beta) {
  detail::require_square(q_, "DenseQState");
  qinv_ = lu_inverse(q_);
}

void DenseQState::refresh_inverse() {
  qinv_ = lu_inverse(q_);
  ++reinversions_;
}

void DenseQState::step(const HvpPair& pair, double mu) {
  require_pair(pair, q_.rows(), "gl_step");
  require_mu(mu, 2.0, "gl_step");

  const Vector a = matvec(q_, pair.h);
  const Vector b = matvec_t(qinv_, pair.v);  // Q^{-T} v
  const double ell = norm2_squared(a) + norm2_squared(b);
  const double big_l = tracker_.update(ell);
  const double c = mu / big_l;

  // Q <- (I - c aa' + c bb') Q
  const Vector qta = matvec_t(q_, a);
  const Vector qtb = matvec_t(q_, b);
  q_.add_outer(-c, a, qta);
  q_.add_outer(c, b, qtb);

  // Q^{-1} <- Q^{-1} (I - c aa' + c bb')^{-1}, via two rank-1 corrections.
  const double d1 = 1.0 - c * norm2_squared(a);
  bool woodbury_ok = std::fabs(d1) >= 1e-12;
  if (woodbury_ok) {
    const Vector ua = matvec(qinv_, a);
    const Vector ub = matvec(qinv_, b);
    const double s = c * dot(a, b) / d1;
    const Vector y = axpy(s, a, b);    // (I - c aa')^{-1} b
    const Vector qy = axpy(s, ua, ub); // Q^{-1} y
    const double d2 = 1.0 + c * dot(b, y);
    if (std::fabs(d2) >= 1e-12) {
      qinv_.add_outer(c / d1, ua, a);
      qinv_.add_outer(-c / d2, qy, y);
    } else {
      woodbury_ok = false;
    }
  }
  if (!woodbury_ok) {
    refresh_inverse();
  }

  ++steps_;
  if (steps_ % kInverseDriftCheckInterval == 0) {
    const Matrix qqinv = q_ * qinv_;
    double err_sq = 0.0;
    for (std::size_t i = 0; i < qqinv.rows(); ++i) {
      for (std::size_t j = 0; j < qqinv.cols(); ++j) {
        const double d = qqinv(i, j) - (i == j ? 1.0 : 0.0);
        err_sq += d * d;
      }
    }
    if (std::sqrt(err_sq) > 1e-6 * std::sqrt(static_cast<double>(q_.rows()))) {
      refresh_inverse();
    }
  }
}

Matrix DenseQState::dense_preconditioner() const { return transpose(q_) * q_; }

DenseQState gl_step(DenseQState state, const HvpPair& pair, double mu) {
  state.step(pair, mu);
  return state;
}

TriangularQState::TriangularQState(Matrix q0, double beta, TriangularMode mode)
    : q_(std::move(q0)), tracker_(beta), mode_(mode) {
  detail::require_square(q_, "TriangularQState");
  for (std::size_t i = 0; i < q_.rows(); ++i) {
    if (q_(i, i) == 0.0) throw SingularError("TriangularQState: zero diagonal");
    for (std::size_t j = 0; j < i; ++j) {
      if (q_(i, j) != 0.0) throw InvalidArgumentError("TriangularQState: q0 not upper triangular");
    }
  }
}

void TriangularQState::step(const HvpPair& pair, double mu) {
  const std::size_t n = q_.rows();
  require_pair(pair, n, "tri_step");
  require_mu(mu, 2.0, "tri_step");

  const Vector a = matvec(q_, pair.h);
  const Vector b = solve_upper_transposed(q_, pair.v);  // Q' b = v by substitution
  const double ell = norm2_squared(a) + norm2_squared(b);
  const double c = mu / tracker_.update(ell);

  if (mode_ == TriangularMode::kExactQr) {
    Matrix m = Matrix::identity(n);
    m.add_outer(-c, a, a);
    m.add_outer(c, b, b);
    const Matrix r = qr_upper_factor(m);
    // Upper-triangular product r * q.
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = i; k <= j; ++k) acc += r(i, k) * q_(k, j);
        out(i, j) = acc;
      }
    }
    q_ = std::move(out);
  } else {
    // [I + D]_R ~ I + triu(D) (+ triu(D, 1) in small-step mode) with
    // D = -c (aa' - bb'); the product with Q runs over suffix sums so the
    // whole step stays O(n^2).
    const bool doubled = mode_ == TriangularMode::kApprox;
    Matrix out = q_;
    for (std::size_t j = 0; j < n; ++j) {
      double sa = 0.0, sb = 0.0;   // sum_{k >= i} of a_k q_kj / b_k q_kj
      double sa1 = 0.0, sb1 = 0.0; // strict versions, k > i
      for (std::size_t ii = j + 1; ii-- > 0;) {
        sa1 = sa;
        sb1 = sb;
        sa += a[ii] * q_(ii, j);
        sb += b[ii] * q_(ii, j);
        double add = a[ii] * sa - b[ii] * sb;
        if (doubled) add += a[ii] * sa1 - b[ii] * sb1;
        out(ii, j) -= c * add;
      }
    }
    q_ = std::move(out);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (q_(i, i) == 0.0) throw SingularError("tri_step: zero diagonal after update");
  }
}

Matrix TriangularQState::dense_preconditioner() const { return transpose(q_) * q_; }

TriangularQState tri_step(TriangularQState state, const HvpPair& pair, double mu) {
  state.step(pair, mu);
  return state;
}

Matrix qeq_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu) {
  require_pair(pair, q.rows(), "qeq_step");
  if (!(mu > 0.0)) throw InvalidArgumentError("qeq_step: mu must be positive");
  const Vector p = apply_p(q, pair.h);
  const double c = mu / tracker.update(norm2_squared(p) + norm2_squared(pair.v));
  // Q <- Q - c Q (pp' - vv')
  const Vector qp = matvec(q, p);
  const Vector qv = matvec(q, pair.v);
  q.add_outer(-c, qp, p);
  q.add_outer(c, qv, pair.v);
  return q;
}

Matrix quad1_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu) {
  require_pair(pair, q.rows(), "quad1_step");
  if (!(mu > 0.0)) throw InvalidArgumentError("quad1_step: mu must be positive");
  const Vector p = apply_p(q, pair.h);
  const double c = mu / tracker.update(norm2_squared(p) + norm2_squared(pair.v));
  // Q <- Q - c (pp' - vv') Q
  const Vector qtp = matvec_t(q, p);
  const Vector qtv = matvec_t(q, pair.v);
  q.add_outer(-c, p, qtp);
  q.add_outer(c, pair.v, qtv);
  return q;
}

Matrix quad2_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu) {
  require_pair(pair, q.rows(), "quad2_step");
  if (!(mu > 0.0)) throw InvalidArgumentError("quad2_step: mu must be positive");
  const Vector p = apply_p(q, pair.h);
  const double c = 0.5 * mu / tracker.update(norm2_squared(p) + norm2_squared(pair.v));
  // M Q M with M = I - c (pp' - vv'), expanded over the rank-2 structure so
  // the result stays symmetric to the last bit (Q is kept symmetric).
  const Vector qp = matvec(q, p);
  const Vector qv = matvec(q, pair.v);
  const double spp = dot(p, qp);
  const double spv = dot(p, qv);
  const double svv = dot(pair.v, qv);
  q.add_sym_outer(-c, p, qp);
  q.add_sym_outer(c, pair.v, qv);
  const double c2 = c * c;
  q.add_outer(c2 * spp, p, p);
  q.add_sym_outer(-c2 * spv, p, pair.v);
  q.add_outer(c2 * svv, pair.v, pair.v);
  return q;
}

Matrix qep_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu) {
  require_pair(pair, q.rows(), "qep_step");
  if (!(mu > 0.0 && mu <= 1.0)) throw InvalidArgumentError("qep_step: mu must be in (0, 1]");
  const Vector p = apply_p(q, pair.h);
  const Vector u1 = matvec(q, p);
  const Vector u2 = matvec(q, pair.v);
  const double c = mu / tracker.update(norm2_squared(u1) + norm2_squared(u2));
  // Q <- Q - c Q (pp' - vv') Q'Q
  const Vector w1 = matvec_t(q, u1);
  const Vector w2 = matvec_t(q, u2);
  q.add_outer(-c, u1, w1);
  q.add_outer(c, u2, w2);
  return q;
}

Quad1State::Quad1State(Matrix q0, double beta, long rotate_every, int rotation_order)
    : q_(std::move(q0)), tracker_(beta), rotate_every_(rotate_every),
      rotation_order_(rotation_order) {
  detail::require_square(q_, "Quad1State");
  if (rotate_every_ < 1) throw InvalidArgumentError("Quad1State: rotate_every must be >= 1");
}

void Quad1State::step(const HvpPair& pair, double mu) {
  q_ = quad1_step(std::move(q_), tracker_, pair, mu);
  if (++steps_ % rotate_every_ == 0) {
    q_ = symmetrize(procrustes_rotate(q_, rotation_order_));
  }
}

Matrix Quad1State::dense_preconditioner() const { return transpose(q_) * q_; }

double strong_convexity_probe(const Matrix& q, const Matrix& h, std::size_t trials,
                              CounterRng& rng) {
  detail::require_same_shape(q, h, "strong_convexity_probe");
  detail::require_square(q, "strong_convexity_probe");
  if (trials < 1) throw InvalidArgumentError("strong_convexity_probe: trials must be >= 1");
  const std::size_t n = q.rows();
  const Matrix qinv = lu_inverse(q);
  Matrix m = (q * (h * h)) * transpose(q);
  m += 3.0 * (transpose(qinv) * qinv);

  double best = std::numeric_limits<double>::infinity();
  Matrix e(n, n);
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      e(i, i) = rng.normal();
      for (std::size_t j = i + 1; j < n; ++j) {
        const double x = rng.normal();
        e(i, j) = x;
        e(j, i) = x;
      }
    }
    const double fro = frobenius_norm(e);
    if (fro == 0.0) continue;
    e *= 1.0 / fro;  // tr(E^2) = 1
    const Matrix e2 = e * e;
    double val = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) val += e2(i, j) * m(j, i);
    }
    best = std::min(best, val);
  }
  return best;
}

Vector precond_grad(const DenseQState& state, const Vector& g) {
  return matvec_t(state.q(), matvec(state.q(), g));
}

Vector precond_grad(const TriangularQState& state, const Vector& g) {
  return matvec_t(state.q(), matvec(state.q(), g));
}

}  // namespace hessfit
