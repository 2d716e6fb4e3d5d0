#pragma once

#include "hessfit/group_fitters.hpp"
#include "hessfit/matrix.hpp"

namespace hessfit {

// Q = diag(q), fitted in the group of invertible diagonal matrices; all
// per-step work is elementwise.
struct DiagonalQ {
  Vector q;
  LipschitzTracker tracker;

  DiagonalQ(Vector q0, double beta = 0.0);
  std::size_t dim() const { return q.size(); }
  Matrix dense_preconditioner() const;
};

DiagonalQ diag_step(DiagonalQ state, const HvpPair& pair, double mu);

enum class KronMode { kQr, kInverseFree };

// Two-factor Kronecker preconditioner Q = Q2 (x) Q1 acting on parameters
// that reshape column-major to m1 x m2. In qr mode the factors stay in the
// triangular group via [.]_R; inverse-free mode multiplies updates in
// without any solves.
struct KronQ {
  Matrix q1;  // m1 x m1
  Matrix q2;  // m2 x m2
  LipschitzTracker tracker1;
  LipschitzTracker tracker2;
  KronMode mode = KronMode::kQr;

  KronQ(Matrix q1_initial, Matrix q2_initial, double beta = 0.0, KronMode mode_ = KronMode::kQr);
  std::size_t dim() const { return q1.rows() * q2.rows(); }
  // Dense Q2 (x) Q1, for oracle comparisons at small sizes.
  Matrix dense_q() const;
  Matrix dense_preconditioner() const;
};

KronQ kron_step(KronQ state, const HvpPair& pair, double mu);

// Low-rank approximation Q = (I + U V') diag(d), r columns; inverses are
// applied through the Woodbury identity against the r x r core I + V'U.
struct LraQ {
  Vector d;
  Matrix u;  // n x r
  Matrix v;  // n x r
  LipschitzTracker tracker_d;
  LipschitzTracker tracker_u;
  LipschitzTracker tracker_v;
  bool update_u_next = true;

  LraQ(Vector d0, Matrix u0, Matrix v0, double beta = 0.0);
  static LraQ scaled_identity(std::size_t n, std::size_t r, double scale, double beta = 0.0);
  // d = scale with small random U, V. Zero factors are a fixed point of the
  // U/V updates, so fitting a nontrivial low-rank part needs this start.
  static LraQ random_init(std::size_t n, std::size_t r, double scale, CounterRng& rng,
                          double beta = 0.0);

  std::size_t dim() const { return d.size(); }
  std::size_t rank() const { return u.cols(); }

  Vector apply_q(const Vector& x) const;      // Q x
  Vector apply_qt(const Vector& x) const;     // Q' x
  Vector apply_qinv_t(const Vector& x) const; // Q^{-T} x
  Vector apply_qinv(const Vector& x) const;   // Q^{-1} x
  double core_determinant() const;            // det(I + V'U)

  Matrix dense_q() const;
  Matrix dense_preconditioner() const;
};

// Updates d every call and exactly one of U, V, alternating.
LraQ lra_step(LraQ state, const HvpPair& pair, double mu);

// Gradient step toward the minimum-norm (U, V) representation of the same
// product U V'; leaves U V' unchanged up to O(mu^4).
LraQ lra_balance(LraQ state, double mu);

Vector precond_grad(const DiagonalQ& state, const Vector& g);
Vector precond_grad(const KronQ& state, const Vector& g);
Vector precond_grad(const LraQ& state, const Vector& g);

// Column-major reshape of a length m1*m2 vector to m1 x m2 and back.
Matrix uvec(const Vector& x, std::size_t m1, std::size_t m2);
Vector vec(const Matrix& x);

}  // namespace hessfit
