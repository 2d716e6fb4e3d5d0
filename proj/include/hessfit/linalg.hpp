#pragma once

#include <cstdint>

#include "hessfit/matrix.hpp"
#include "hessfit/rng.hpp"

namespace hessfit {

// Certified bracket for the spectral norm from cheap deterministic bounds.
struct NormBounds {
  double lower = 0.0;  // alpha: max row/column 2-norm
  double upper = 0.0;  // min over the cheap upper bounds
};

// Deterministic bounds with lower <= ||A||_2 <= upper. The lower bound is
// the largest row/column 2-norm; the upper bound is the minimum of
// sqrt(n)*alpha, ||A||_F, n*||A||_max, sqrt(n)*||A||_1 and sqrt(n)*||A||_inf.
NormBounds spectral_norm_bounds(const Matrix& a);

// Randomized lower estimate of ||A||_2 by block power iteration without
// re-orthogonalization. The block's centroid is rotated onto the
// alpha-achieving row/column with a Householder reflection, and that
// direction itself is kept as one of the probe columns, so the result never
// falls below the single power-step bound (and hence never below alpha).
double estimate_spectral_norm(const Matrix& a, std::size_t subspace_dim, std::size_t iters,
                              CounterRng& rng);

struct EigDecomposition {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors;  // columns, a = V diag(lambda) V'
};

// Symmetric eigendecomposition by cyclic Jacobi sweeps. Input must be
// symmetric within 1e-10 * ||a||_F; accurate and dependency-free at the
// matrix sizes used here.
EigDecomposition sym_eig(const Matrix& a);

// Spectral function helpers built on sym_eig. `power` applies
// lambda -> lambda^power and requires positive eigenvalues for non-integer
// exponents; callers use -0.5, 0.5, -0.25.
Matrix spd_power(const Matrix& a, double power, double min_eigenvalue = 0.0);

// R factor of the Householder QR of a square full-rank matrix, with the
// sign convention that diag(R) >= 0.
Matrix qr_upper_factor(const Matrix& a);

// First-order surrogate for the R factor of QR(I + delta) with symmetric
// small delta: I + triu(delta) + triu(delta, 1). With large_step set, the
// strictly-upper doubling is dropped and plain I + triu(delta) is returned.
Matrix qr_upper_approx(const Matrix& delta, bool large_step);

// One Newton-Schulz step 1.5*P - 0.5*P*Hsq*P^2 toward Hsq^{-1/2}.
Matrix newton_schulz_step(const Matrix& p, const Matrix& hsq);

// One inverse-fourth-root step Q - 0.25*(P*A*P - I)*Q toward A^{-1/4}.
Matrix inverse_fourth_root_step(const Matrix& q, const Matrix& p, const Matrix& a);

// Left-multiplies Q by a truncated-polynomial rotation exp(a*R), R = Q' - Q,
// chosen to increase tr(Q) (a step of the orthogonal Procrustes problem
// toward the symmetric polar factor). order selects the expansion (2, 3 or
// 4); step sizes are clamped so the orthogonality defect ||O'O - I|| stays
// at or under 1e-3 per step.
Matrix procrustes_rotate(const Matrix& q, int order);

// Hilbert matrix H_ij = 1/(i+j-1), 1-based.
Matrix hilbert_matrix(std::size_t n);

}  // namespace hessfit
