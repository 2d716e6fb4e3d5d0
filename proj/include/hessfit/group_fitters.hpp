#pragma once

#include "hessfit/criterion.hpp"
#include "hessfit/linalg.hpp"
#include "hessfit/matrix.hpp"

namespace hessfit {

// Running normalizer for the fitting step size. After an update with
// sample ell, the value is max(beta * L + (1 - beta) * ell, ell), so it
// never drops below the current sample.
struct LipschitzTracker {
  double value = 0.0;
  double beta = 0.0;

  LipschitzTracker() = default;
  explicit LipschitzTracker(double beta_, double initial = 0.0) : value(initial), beta(beta_) {
    if (!(beta_ >= 0.0 && beta_ <= 1.0)) {
      throw InvalidArgumentError("LipschitzTracker: beta must be in [0,1]");
    }
  }

  // Returns the updated value.
  double update(double ell);
};

LipschitzTracker tracker_update(LipschitzTracker tracker, double ell);

// Fitter on the full general linear group; P = Q'Q. The inverse of Q is
// maintained with rank-1 Woodbury corrections, monitored against drift and
// recomputed from scratch on breach.
class DenseQState {
 public:
  explicit DenseQState(Matrix q0, double beta = 0.0);

  void step(const HvpPair& pair, double mu);

  const Matrix& q() const { return q_; }
  const Matrix& q_inverse() const { return qinv_; }
  const LipschitzTracker& tracker() const { return tracker_; }
  LipschitzTracker& tracker() { return tracker_; }
  std::size_t dim() const { return q_.rows(); }
  long reinversion_count() const { return reinversions_; }

  Matrix dense_preconditioner() const;  // Q'Q

 private:
  void refresh_inverse();

  Matrix q_;
  Matrix qinv_;
  LipschitzTracker tracker_;
  long steps_ = 0;
  long reinversions_ = 0;
};

DenseQState gl_step(DenseQState state, const HvpPair& pair, double mu);

enum class TriangularMode { kExactQr, kApprox, kTriuOnly };

// Fitter restricted to upper-triangular Q; the rotation part of each dense
// update is discarded by [.]_R, exactly (QR) or to first order.
class TriangularQState {
 public:
  TriangularQState(Matrix q0, double beta = 0.0, TriangularMode mode = TriangularMode::kExactQr);

  void step(const HvpPair& pair, double mu);

  const Matrix& q() const { return q_; }
  TriangularMode mode() const { return mode_; }
  const LipschitzTracker& tracker() const { return tracker_; }
  LipschitzTracker& tracker() { return tracker_; }
  std::size_t dim() const { return q_.rows(); }

  Matrix dense_preconditioner() const;

 private:
  Matrix q_;
  LipschitzTracker tracker_;
  TriangularMode mode_;
};

TriangularQState tri_step(TriangularQState state, const HvpPair& pair, double mu);

// The four inverse-free update rules. Each takes the factor by value plus a
// live tracker and returns the updated factor; no linear solves anywhere.

// dQ = Q E Q: Q <- Q - (mu/L) Q (Ph h'P - v v'), ell = ||Ph||^2 + ||v||^2.
Matrix qeq_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu);

// dQ = Q^0.5 E Q^1.5: Q <- Q - (mu/L) (Ph h'P - v v') Q, same ell.
Matrix quad1_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu);

// Quadratic form Q <- M Q M with M = I - mu/(2L) (Ph h'P - v v'); preserves
// symmetry exactly and definiteness in exact arithmetic.
Matrix quad2_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu);

// dQ = Q E P: Q <- Q - (mu/L) Q (Ph h'P - v v') Q'Q, ell = ||QPh||^2 + ||Qv||^2.
Matrix qep_step(Matrix q, LipschitzTracker& tracker, const HvpPair& pair, double mu);

// quad1 with its periodic Procrustes rotation pulling Q back toward SPD.
class Quad1State {
 public:
  Quad1State(Matrix q0, double beta = 0.0, long rotate_every = 32, int rotation_order = 3);

  void step(const HvpPair& pair, double mu);

  const Matrix& q() const { return q_; }
  LipschitzTracker& tracker() { return tracker_; }
  Matrix dense_preconditioner() const;

 private:
  Matrix q_;
  LipschitzTracker tracker_;
  long rotate_every_;
  int rotation_order_;
  long steps_ = 0;
};

// Sampled lower probe of the fitting curvature at Q: minimum over random
// unit-trace symmetric directions E of tr(E^2 Q H^2 Q' + 3 E^2 Q^{-T} Q^{-1}).
// Always at least 2*sqrt(3)*lambda_min(H).
double strong_convexity_probe(const Matrix& q, const Matrix& h, std::size_t trials,
                              CounterRng& rng);

// P g = Q'(Q g) for the dense and triangular factors.
Vector precond_grad(const DenseQState& state, const Vector& g);
Vector precond_grad(const TriangularQState& state, const Vector& g);

}  // namespace hessfit
