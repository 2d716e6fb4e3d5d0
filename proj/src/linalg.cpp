#include "hessfit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace hessfit {

namespace {

constexpr double kTiny = 1e-300;

double trace_product(const Matrix& a, const Matrix& b) {
  // tr(a*b) without forming the product.
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * b(j, i);
  }
  return acc;
}

}  // namespace

NormBounds spectral_norm_bounds(const Matrix& a) {
  if (a.empty()) throw DimensionError("spectral_norm_bounds: empty matrix");
  const std::size_t m = a.rows(), n = a.cols();
  double max_col_sq = 0.0, max_row_sq = 0.0;
  double max_entry = 0.0, norm1 = 0.0, norm_inf_ = 0.0, fro_sq = 0.0;
  Vector col_sq(n, 0.0), col_abs(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.row_ptr(i);
    double row_sq = 0.0, row_abs = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = row[j];
      const double ax = std::fabs(x);
      row_sq += x * x;
      row_abs += ax;
      col_sq[j] += x * x;
      col_abs[j] += ax;
      max_entry = std::max(max_entry, ax);
    }
    fro_sq += row_sq;
    max_row_sq = std::max(max_row_sq, row_sq);
    norm_inf_ = std::max(norm_inf_, row_abs);
  }
  for (std::size_t j = 0; j < n; ++j) {
    max_col_sq = std::max(max_col_sq, col_sq[j]);
    norm1 = std::max(norm1, col_abs[j]);
  }
  NormBounds b;
  b.lower = std::sqrt(std::max(max_col_sq, max_row_sq));
  const double fro = std::sqrt(fro_sq);
  if (m == n) {
    const double rn = std::sqrt(static_cast<double>(n));
    b.upper = std::min({rn * b.lower, fro, static_cast<double>(n) * max_entry, rn * norm1,
                        rn * norm_inf_});
  } else {
    // General-shape variants of the same bounds.
    b.upper = std::min({fro, std::sqrt(norm1 * norm_inf_),
                        std::sqrt(static_cast<double>(n)) * std::sqrt(max_col_sq),
                        std::sqrt(static_cast<double>(m)) * std::sqrt(max_row_sq)});
  }
  b.upper = std::max(b.upper, b.lower);
  return b;
}

double estimate_spectral_norm(const Matrix& a, std::size_t subspace_dim, std::size_t iters,
                              CounterRng& rng) {
  if (a.empty()) throw DimensionError("estimate_spectral_norm: empty matrix");
  if (subspace_dim < 1 || iters < 1) {
    throw InvalidArgumentError("estimate_spectral_norm: subspace_dim and iters must be >= 1");
  }

  // Locate the alpha-achieving row or column; when a row wins, estimate on
  // the transpose, which has the same spectral norm.
  double best_col_sq = -1.0, best_row_sq = -1.0;
  std::size_t best_col = 0, best_row = 0;
  Vector col_sq(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row_sq = 0.0;
    const double* row = a.row_ptr(i);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      row_sq += row[j] * row[j];
      col_sq[j] += row[j] * row[j];
    }
    if (row_sq > best_row_sq) {
      best_row_sq = row_sq;
      best_row = i;
    }
  }
  for (std::size_t j = 0; j < a.cols(); ++j) {
    if (col_sq[j] > best_col_sq) {
      best_col_sq = col_sq[j];
      best_col = j;
    }
  }
  if (std::max(best_col_sq, best_row_sq) <= 0.0) return 0.0;

  const bool use_transpose = best_row_sq > best_col_sq;
  const Matrix at = use_transpose ? transpose(a) : Matrix();
  const Matrix& work = use_transpose ? at : a;
  const std::size_t pivot_col = use_transpose ? best_row : best_col;

  const std::size_t m = work.rows();
  Vector pivot(m);
  for (std::size_t i = 0; i < m; ++i) pivot[i] = work(i, pivot_col);
  const double pivot_norm = norm2(pivot);

  const std::size_t k = std::min(subspace_dim, m);
  // Probe block: k random columns plus the pivot direction itself.
  std::vector<Vector> block(k + 1);
  for (std::size_t j = 0; j < k; ++j) block[j] = rng.normal_vector(m);
  block[k] = pivot;

  // Householder reflection taking the block centroid onto the pivot direction.
  Vector centroid(m, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < m; ++i) centroid[i] += block[j][i];
  }
  const double cn = norm2(centroid);
  if (cn > kTiny) {
    Vector u = scale(1.0 / pivot_norm, pivot);
    Vector w = vsub(scale(1.0 / cn, centroid), u);
    const double wn_sq = norm2_squared(w);
    if (wn_sq > kTiny) {
      for (std::size_t j = 0; j < k; ++j) {
        const double proj = 2.0 * dot(w, block[j]) / wn_sq;
        for (std::size_t i = 0; i < m; ++i) block[j][i] -= proj * w[i];
      }
    }
  }

  double best = 0.0;
  for (auto& x : block) {
    for (std::size_t it = 0; it < iters; ++it) {
      Vector y = matvec_t(work, x);
      const double yn = norm2(y);
      if (yn <= kTiny) break;
      Vector z = matvec(work, y);
      const double zn = norm2(z);
      best = std::max(best, zn / yn);
      if (zn <= kTiny) break;
      x = scale(1.0 / zn, std::move(z));
    }
  }
  return best;
}

EigDecomposition sym_eig(const Matrix& a) {
  detail::require_square(a, "sym_eig");
  const std::size_t n = a.rows();
  const double fro = frobenius_norm(a);
  if (asymmetry(a) > 1e-10 * std::max(fro, kTiny)) {
    throw SymmetryError("sym_eig: input is not symmetric");
  }

  Matrix b = symmetrize(a);
  Matrix v = Matrix::identity(n);

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off_sq += b(i, j) * b(i, j);
    }
    if (std::sqrt(2.0 * off_sq) <= 1e-15 * std::max(fro, kTiny)) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = b(p, q);
        if (apq == 0.0) continue;
        const double app = b(p, p);
        const double aqq = b(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::fabs(theta) > 1e154) {
          t = 0.5 / theta;  // avoids theta^2 overflow
        } else {
          t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        b(p, p) = app - t * apq;
        b(q, q) = aqq + t * apq;
        b(p, q) = 0.0;
        b(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double bkp = b(k, p);
          const double bkq = b(k, q);
          b(k, p) = c * bkp - s * bkq;
          b(p, k) = b(k, p);
          b(k, q) = s * bkp + c * bkq;
          b(q, k) = b(k, q);
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return b(i, i) < b(j, j); });

  EigDecomposition eig;
  eig.eigenvalues.resize(n);
  eig.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    eig.eigenvalues[j] = b(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) eig.eigenvectors(i, j) = v(i, order[j]);
  }
  return eig;
}

Matrix spd_power(const Matrix& a, double power, double min_eigenvalue) {
  const EigDecomposition eig = sym_eig(a);
  const bool integral = power == std::round(power) && power >= 0.0;
  Vector f(eig.eigenvalues.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double lam = eig.eigenvalues[i];
    if (!integral && lam <= min_eigenvalue) {
      throw DefinitenessError("spd_power: eigenvalue " + std::to_string(lam) +
                              " out of range for exponent " + std::to_string(power));
    }
    f[i] = std::pow(lam, power);
  }
  // V diag(f) V'
  const Matrix& v = eig.eigenvectors;
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += v(i, k) * f[k] * v(j, k);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

Matrix qr_upper_factor(const Matrix& a) {
  detail::require_square(a, "qr_upper_factor");
  const std::size_t n = a.rows();
  Matrix r = a;
  Vector w(n);
  for (std::size_t k = 0; k < n; ++k) {
    double col_sq = 0.0;
    for (std::size_t i = k; i < n; ++i) col_sq += r(i, k) * r(i, k);
    const double col_norm = std::sqrt(col_sq);
    if (col_norm <= 1e-14 * std::max(frobenius_norm(a), kTiny)) {
      throw SingularError("qr_upper_factor: rank-deficient matrix");
    }
    const double alpha = r(k, k) >= 0.0 ? -col_norm : col_norm;
    double w_sq = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      w[i] = r(i, k);
      if (i == k) w[i] -= alpha;
      w_sq += w[i] * w[i];
    }
    if (w_sq > kTiny) {
      for (std::size_t j = k; j < n; ++j) {
        double proj = 0.0;
        for (std::size_t i = k; i < n; ++i) proj += w[i] * r(i, j);
        proj *= 2.0 / w_sq;
        for (std::size_t i = k; i < n; ++i) r(i, j) -= proj * w[i];
      }
    }
    r(k, k) = alpha;
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
  }
  // Fix signs so the diagonal is nonnegative.
  for (std::size_t i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) {
      for (std::size_t j = i; j < n; ++j) r(i, j) = -r(i, j);
    }
    if (r(i, i) <= 1e-14 * std::max(frobenius_norm(a), kTiny)) {
      throw SingularError("qr_upper_factor: rank-deficient matrix");
    }
  }
  return r;
}

Matrix qr_upper_approx(const Matrix& delta, bool large_step) {
  detail::require_square(delta, "qr_upper_approx");
  const std::size_t n = delta.rows();
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    r(i, i) = 1.0 + delta(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      r(i, j) = large_step ? delta(i, j) : 2.0 * delta(i, j);
    }
  }
  return r;
}

Matrix newton_schulz_step(const Matrix& p, const Matrix& hsq) {
  detail::require_same_shape(p, hsq, "newton_schulz_step");
  detail::require_square(p, "newton_schulz_step");
  Matrix out = p * 1.5;
  out -= 0.5 * ((p * hsq) * (p * p));
  return out;
}

Matrix inverse_fourth_root_step(const Matrix& q, const Matrix& p, const Matrix& a) {
  detail::require_same_shape(q, p, "inverse_fourth_root_step");
  detail::require_same_shape(q, a, "inverse_fourth_root_step");
  detail::require_square(q, "inverse_fourth_root_step");
  Matrix pap = (p * a) * p;
  for (std::size_t i = 0; i < q.rows(); ++i) pap(i, i) -= 1.0;
  return q - 0.25 * (pap * q);
}

Matrix procrustes_rotate(const Matrix& q, int order) {
  detail::require_square(q, "procrustes_rotate");
  if (order < 2 || order > 4) {
    throw InvalidArgumentError("procrustes_rotate: order must be 2, 3 or 4");
  }
  const std::size_t n = q.rows();
  Matrix r = transpose(q);
  r -= q;

  const double r_fro = frobenius_norm(r);
  if (r_fro <= 1e-15 * std::max(frobenius_norm(q), kTiny)) return q;  // already symmetric

  // Clamp scale from a one-step aligned power estimate. The estimate is a
  // lower bound, so the truncation-error budget is re-checked exactly after
  // the rotation is built and the step is halved on the rare overshoot.
  CounterRng rng(0x70726F6372757374ULL);
  const double r_norm =
      std::max(estimate_spectral_norm(r, std::min<std::size_t>(32, n), 1, rng), kTiny);

  const double t1 = 0.5 * r_fro * r_fro;  // tr(RQ) = ||R||_F^2 / 2 >= 0
  const Matrix r2 = r * r;
  const double t2 = trace_product(r2, q);
  const Matrix r3 = order >= 3 ? r2 * r : Matrix();
  const Matrix r4 = order == 4 ? r2 * r2 : Matrix();

  double a = 0.0;
  if (order == 2) {
    const double a_max = 0.25 / r_norm;
    a = (t2 >= 0.0) ? a_max : std::min(-t1 / t2, a_max);
  } else if (order == 3) {
    const double a_max = 0.625 / r_norm;
    // tr(R^3 Q) = -0.5 tr(R^4) = -0.5 ||R^2||_F^2, exactly nonpositive; the
    // closed form avoids the sign noise of the direct trace near symmetry.
    const double r2_fro = frobenius_norm(r2);
    const double t3 = -0.5 * r2_fro * r2_fro;
    if (t3 == 0.0) {
      a = (t2 >= 0.0) ? a_max : std::min(-t1 / t2, a_max);
    } else {
      const double disc = std::sqrt(t2 * t2 - 1.5 * t1 * t3);
      a = std::min((-t2 - disc) / (0.75 * t3), a_max);
    }
  } else {
    // Coefficients chosen so the defect is exactly c4^2 a^8 R^8.
    const double c3 = (2.0 - std::sqrt(2.0)) / 4.0;
    const double c4 = (3.0 - 2.0 * std::sqrt(2.0)) / 8.0;
    const double a_max = 1.1 / r_norm;
    const double r2_fro = frobenius_norm(r2);
    const double t3 = -0.5 * r2_fro * r2_fro;
    const double t4 = trace_product(r4, q);
    // d/da tr(Omega Q): t1 + a t2 + 3 c3 a^2 t3 + 4 c4 a^3 t4. Positive at
    // a = 0; take the first sign change in (0, a_max], else a_max.
    const auto slope = [&](double x) {
      return t1 + x * (t2 + x * (3.0 * c3 * t3 + x * 4.0 * c4 * t4));
    };
    a = a_max;
    const int grid = 64;
    double lo = 0.0;
    for (int i = 1; i <= grid; ++i) {
      const double hi = a_max * static_cast<double>(i) / grid;
      if (slope(hi) < 0.0) {
        double left = lo, right = hi;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (left + right);
          if (slope(mid) < 0.0) {
            right = mid;
          } else {
            left = mid;
          }
        }
        a = 0.5 * (left + right);
        break;
      }
      lo = hi;
    }
  }
  a = std::max(a, 0.0);

  const auto build_omega = [&](double step) {
    Matrix omega = Matrix::identity(n);
    omega += step * r;
    omega += (0.5 * step * step) * r2;
    if (order == 3) {
      omega += (step * step * step / 8.0) * r3;
    } else if (order == 4) {
      const double c3 = (2.0 - std::sqrt(2.0)) / 4.0;
      const double c4 = (3.0 - 2.0 * std::sqrt(2.0)) / 8.0;
      omega += (c3 * step * step * step) * r3;
      omega += (c4 * step * step * step * step) * r4;
    }
    return omega;
  };

  // The clamp keeps the orthogonality defect near but under 1e-3 when the
  // norm estimate is exact; when it undershoots, halve until the exact
  // defect (spectral norm of the symmetric matrix O'O - I) fits the budget.
  Matrix omega = build_omega(a);
  for (int tries = 0; tries < 80; ++tries) {
    Matrix defect = transpose(omega) * omega;
    for (std::size_t i = 0; i < n; ++i) defect(i, i) -= 1.0;
    const EigDecomposition eig = sym_eig(defect);
    const double norm = std::max(std::fabs(eig.eigenvalues.front()),
                                 std::fabs(eig.eigenvalues.back()));
    if (norm <= 1e-3) break;
    a *= 0.5;
    omega = build_omega(a);
  }
  return omega * q;
}

Matrix hilbert_matrix(std::size_t n) {
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      h(i, j) = 1.0 / static_cast<double>(i + j + 1);
    }
  }
  return h;
}

}  // namespace hessfit
