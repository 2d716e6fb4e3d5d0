#include "hessfit/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>

#include "hessfit/baselines.hpp"
#include "hessfit/bench.hpp"
#include "hessfit/criterion.hpp"
#include "hessfit/group_fitters.hpp"
#include "hessfit/linalg.hpp"
#include "hessfit/precond_adapters.hpp"
#include "hessfit/problems.hpp"
#include "hessfit/sparse_fitters.hpp"

// Acceptance suite. Every check runs at its stated tolerance and reports the
// measured values; a criterion that does not hold numerically is reported as
// a failure with the measurement, never weakened.

namespace hessfit {

namespace {

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

struct Clause {
  bool pass;
  std::string text;
};

CriterionResult combine(int number, const std::string& name, const std::vector<Clause>& clauses) {
  CriterionResult result;
  result.number = number;
  result.name = name;
  result.pass = true;
  for (const auto& c : clauses) {
    result.pass = result.pass && c.pass;
    if (!result.detail.empty()) result.detail += "; ";
    result.detail += (c.pass ? "" : "FAILED ") + c.text;
  }
  return result;
}

Matrix random_spd(std::size_t n, CounterRng& rng, double shift = 0.5) {
  Matrix a(n, n);
  for (double& x : a.data()) x = rng.normal();
  Matrix s = transpose(a) * a;
  s *= 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += shift;
  return s;
}

std::vector<Curve> seeded_runs(const char* scenario, const char* method, long iters,
                               int seeds = 5) {
  std::vector<ScenarioConfig> cfgs;
  for (int s = 1; s <= seeds; ++s) {
    ScenarioConfig c = registered_config(scenario, method);
    if (iters > 0) c.iters = iters;
    c.seed = static_cast<std::uint64_t>(s);
    cfgs.push_back(std::move(c));
  }
  return run_scenarios(cfgs, 2);
}

// R^2 of the straight-line fit of log10(metric) against iteration over the
// decaying segment (errors above the machine floor).
double semilog_r2(const std::vector<CurvePoint>& points, double floor) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  long count = 0;
  for (const auto& p : points) {
    if (p.iter < 1 || !(p.metric > floor)) continue;
    const double x = static_cast<double>(p.iter);
    const double y = std::log10(p.metric);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++count;
  }
  if (count < 10) return 0.0;
  const double n = static_cast<double>(count);
  const double cov = n * sxy - sx * sy;
  const double vx = n * sxx - sx * sx;
  const double vy = n * syy - sy * sy;
  if (vx <= 0 || vy <= 0) return 0.0;
  return (cov * cov) / (vx * vy);
}

double spectral_norm_exact(const Matrix& symmetric) {
  const EigDecomposition eig = sym_eig(symmetric);
  return std::max(std::fabs(eig.eigenvalues.front()), std::fabs(eig.eigenvalues.back()));
}

// sigma_max oracle independent of the block power estimator: Jacobi
// eigendecomposition of A'A.
double sigma_max_oracle(const Matrix& a) {
  const Matrix ata = symmetrize(transpose(a) * a);
  const EigDecomposition eig = sym_eig(ata);
  return std::sqrt(std::max(0.0, eig.eigenvalues.back()));
}

// ---------------------------------------------------------------------------
// 1. Table II rate separation on Hilbert-3.

CriterionResult criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Clause> clauses;

  {
    const auto curves = seeded_runs("fig1", "euclid", 20000);
    const double slope = fit_loglog_slope(average_curves(curves), 100, 20000);
    clauses.push_back({std::fabs(slope + 0.5) <= 0.2,
                       fmt("euclid log-log slope %.3f (want -0.5 +/- 0.2)", slope)});
  }
  {
    const auto curves = seeded_runs("fig1", "closed_form", 20000);
    const double slope = fit_loglog_slope(average_curves(curves), 100, 20000);
    clauses.push_back({std::fabs(slope + 1.0) <= 0.2,
                       fmt("closed-form log-log slope %.3f (want -1.0 +/- 0.2)", slope)});
  }
  for (const char* method : {"spd", "gl"}) {
    const auto curves = seeded_runs("fig1", method, 20000);
    const auto mean = average_curves(curves);
    double min_err = std::numeric_limits<double>::infinity();
    for (const auto& p : mean) min_err = std::min(min_err, p.metric);
    const double r2 = semilog_r2(mean, 1e-12);
    const bool ok = min_err < 1e-8 && r2 >= 0.95;
    clauses.push_back(
        {ok, fmt("%s reaches err %.3g (want < 1e-8), semilog R^2 %.3f (want >= 0.95)", method,
                 min_err, r2)});
  }
  {
    const Curve newton = run_scenario(registered_config("fig1", "newton"));
    const long hit = newton.first_iter_at_or_below(1e-12);
    clauses.push_back({hit >= 1 && hit <= 30,
                       fmt("newton err<1e-12 at iter %ld (want <= 30; min err %.3g%s)", hit,
                           newton.min_metric(), newton.diverged ? ", run diverged" : "")});
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  clauses.push_back({secs <= 60.0, fmt("runtime %.1f s (want <= 60)", secs)});
  return combine(1, "table-ii-rate-separation", clauses);
}

// ---------------------------------------------------------------------------
// 2. Quadratic contraction ratio of the inverse-square-root iteration.

CriterionResult criterion2() {
  const double cap = (std::sqrt(17.0) + 3.0) / 4.0 + 1e-9;
  CounterRng rng(20240202);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 8;
    // Commuting diagonal setup with lambda(H P0) inside (0, 1.56).
    Vector lam(n);
    for (double& x : lam) x = 0.01 + 1.54 * rng.uniform();
    const double p0 = 0.2 + 0.8 * rng.uniform();  // scaled so lambda * p0 < 1.56
    Matrix h = Matrix::from_diag(lam);
    for (double& x : h.data()) x /= std::max(1.0, p0 * 1.56 / 1.55);
    const Matrix hsq = h * h;
    Matrix p = Matrix::identity(n) * p0;
    double prev = spectral_norm_exact(symmetrize(p * h - Matrix::identity(n)));
    for (int t = 0; t < 40 && prev > 1e-7; ++t) {
      p = newton_schulz_step(p, hsq);
      const double cur = spectral_norm_exact(symmetrize(p * h - Matrix::identity(n)));
      worst = std::max(worst, cur / (prev * prev));
      prev = cur;
    }
  }
  std::vector<Clause> clauses;
  clauses.push_back({worst <= cap, fmt("max ||R+||/||R||^2 = %.6f (cap %.6f)", worst, cap)});
  return combine(2, "newton-schulz-quadratic-ratio", clauses);
}

// ---------------------------------------------------------------------------
// 3. Linear convergence rate of the SPD-manifold fitter.

CriterionResult criterion3() {
  std::vector<Clause> clauses;
  CounterRng seed_rng(33);
  for (int setup = 0; setup < 2; ++setup) {
    // Commuting start on spectra below one so the iterate approaches the
    // optimum from below and stays definite.
    const std::size_t n = 4 + 2 * setup;
    Vector lam(n);
    for (std::size_t i = 0; i < n; ++i) {
      lam[i] = 0.1 + 0.75 * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    const Matrix h = Matrix::from_diag(lam);
    double lam_min = lam[0], bound = 0.0;
    for (double l : lam) bound = std::max(bound, l + l * l);
    const double mu = 0.1 / bound;
    const double predicted = 8.0 * mu * lam_min;

    CounterRng rng(100 + setup);
    Matrix p = Matrix::identity(n);
    const Matrix eye = Matrix::identity(n);
    std::vector<double> logs;
    for (long t = 0; t < 20000; ++t) {
      const Vector v = rng.normal_vector(n);
      p = spd_manifold_step(p, {v, matvec(h, v)}, mu);
      if (t >= 100) {
        const double err = frobenius_distance(p * h, eye);
        if (err < 1e-12) break;
        logs.push_back(std::log(err));
      }
    }
    double measured_decay = 0.0;
    if (logs.size() >= 100) {
      // Regress over the tail half so the multi-mode transient is excluded
      // and only the asymptotic slowest mode remains.
      const std::size_t first = logs.size() / 2;
      const double m = static_cast<double>(logs.size() - first);
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t k = first; k < logs.size(); ++k) {
        const double x = static_cast<double>(k - first);
        sx += x;
        sy += logs[k];
        sxx += x * x;
        sxy += x * logs[k];
      }
      measured_decay = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    const double ratio = std::exp(-measured_decay);
    const double target = 1.0 - predicted;
    const bool ok = logs.size() >= 100 && std::fabs(ratio - target) <= 0.10 * target;
    clauses.push_back({ok, fmt("n=%zu error ratio %.5f vs 1 - 8 mu lambda_min = %.5f "
                               "(want within 10%%; per-step decay %.4f vs %.4f)",
                               n, ratio, target, measured_decay, predicted)});
  }
  return combine(3, "spd-manifold-linear-rate", clauses);
}

// ---------------------------------------------------------------------------
// 4. Strong-convexity lower bound of the group fitting criterion.

CriterionResult criterion4() {
  CounterRng rng(44);
  int violations = 0;
  double tightest = std::numeric_limits<double>::infinity();
  int draws = 0;
  for (std::size_t n : {2ul, 5ul, 10ul}) {
    for (int trial = 0; trial < 34 && draws < 100; ++trial, ++draws) {
      Matrix q(n, n);
      for (double& x : q.data()) x = rng.normal();
      if (std::fabs(lu_determinant(q)) < 1e-8) continue;
      const Matrix h = random_spd(n, rng, 0.05 + rng.uniform());
      const double lam_min = sym_eig(h).eigenvalues.front();
      const double bound = 2.0 * std::sqrt(3.0) * lam_min;
      const double probe = strong_convexity_probe(q, h, 256, rng);
      if (probe < bound - 1e-9) ++violations;
      tightest = std::min(tightest, probe - bound);
    }
  }
  std::vector<Clause> clauses;
  clauses.push_back({violations == 0,
                     fmt("%d draws, %d bound violations, tightest margin %.3g", draws, violations,
                         tightest)});
  return combine(4, "strong-convexity-lower-bound", clauses);
}

// ---------------------------------------------------------------------------
// 5. Fig. 2 qualitative reproduction on the 50x50 tridiagonal model.

CriterionResult criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ScenarioConfig> cfgs;
  const auto push = [&](const char* scen, const char* method, long iters) {
    ScenarioConfig c = registered_config(scen, method);
    if (iters > 0) c.iters = iters;
    c.seed = 1;
    cfgs.push_back(std::move(c));
  };
  push("fig2a", "gl", 500000);
  push("fig2a", "tri", 500000);
  push("fig2b", "gl", 50000);
  push("fig2b", "tri", 50000);
  push("fig2b", "closed_form", 50000);
  push("fig2b", "bfgs", 50000);
  push("fig2c", "gl", 5000);
  push("fig2c", "tri", 5000);
  push("fig2c", "closed_form", 5000);
  const auto curves = run_scenarios(cfgs, 2);
  const Curve& a_gl = curves[0];
  const Curve& a_tri = curves[1];
  const Curve& b_gl = curves[2];
  const Curve& b_tri = curves[3];
  const Curve& b_cf = curves[4];
  const Curve& b_bfgs = curves[5];
  const Curve& c_gl = curves[6];
  const Curve& c_tri = curves[7];
  const Curve& c_cf = curves[8];

  std::vector<Clause> clauses;
  clauses.push_back({a_gl.min_metric() <= 1e-6 && a_tri.min_metric() <= 1e-6,
                     fmt("(a) clean floors: gl %.3g, tri %.3g (want <= 1e-6)", a_gl.min_metric(),
                         a_tri.min_metric())});
  clauses.push_back({a_tri.min_metric() <= a_gl.min_metric(),
                     fmt("(a) tri floor %.3g at or below gl floor %.3g", a_tri.min_metric(),
                         a_gl.min_metric())});
  clauses.push_back(
      {b_gl.final_metric() < b_cf.final_metric() && b_tri.final_metric() < b_cf.final_metric(),
       fmt("(b) final err at 5e4: gl %.4g, tri %.4g vs closed form %.4g", b_gl.final_metric(),
           b_tri.final_metric(), b_cf.final_metric())});
  clauses.push_back({b_bfgs.diverged,
                     fmt("(b) bfgs divergence flag %s (max growth %.1fx of min %.3g)",
                         b_bfgs.diverged ? "raised" : "not raised",
                         b_bfgs.final_metric() / b_bfgs.min_metric(), b_bfgs.min_metric())});
  clauses.push_back(
      {c_gl.final_metric() < c_cf.final_metric() && c_tri.final_metric() < c_cf.final_metric(),
       fmt("(c) err at 5000: gl %.4g, tri %.4g vs closed form %.4g", c_gl.final_metric(),
           c_tri.final_metric(), c_cf.final_metric())});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  clauses.push_back({secs <= 600.0, fmt("runtime %.0f s (want <= 600)", secs)});
  return combine(5, "fig2-qualitative", clauses);
}

// ---------------------------------------------------------------------------
// 6. Fig. 3 whitening comparison.

CriterionResult criterion6() {
  const char* methods[] = {"gl", "qeq", "quad1", "quad2", "qep"};
  std::vector<ScenarioConfig> cfgs;
  for (const char* m : methods) {
    for (int s = 1; s <= 5; ++s) {
      ScenarioConfig c = registered_config("fig3", m);
      c.seed = static_cast<std::uint64_t>(s);
      cfgs.push_back(std::move(c));
    }
  }
  const auto curves = run_scenarios(cfgs, 2);

  std::vector<Clause> clauses;
  bool start_ok = true, reduce_ok = true;
  long medians[5] = {0, 0, 0, 0, 0};
  for (int m = 0; m < 5; ++m) {
    std::vector<long> hits;
    for (int s = 0; s < 5; ++s) {
      const Curve& c = curves[m * 5 + s];
      const double kappa0 = c.points.front().metric;
      start_ok = start_ok && kappa0 > 1e6 && kappa0 < 4e6;
      const long hit = c.first_iter_at_or_below(kappa0 * 1e-4);
      if (hit < 0) reduce_ok = false;
      hits.push_back(hit < 0 ? 200000 : hit);
    }
    std::sort(hits.begin(), hits.end());
    medians[m] = hits[2];
  }
  clauses.push_back({start_ok, "initial condition number ~ 2e6"});
  clauses.push_back({reduce_ok, fmt("all five drop kappa by 1e4 within 1e5 iters "
                                    "(median hits: gl %ld, qeq %ld, quad1 %ld, quad2 %ld, qep %ld)",
                                    medians[0], medians[1], medians[2], medians[3], medians[4])});
  const bool qep_first = medians[4] <= medians[0] && medians[4] <= medians[1] &&
                         medians[4] <= medians[2] && medians[4] <= medians[3];
  clauses.push_back({qep_first, fmt("qep median hit %ld at or below the other four", medians[4])});
  return combine(6, "fig3-whitening", clauses);
}

// ---------------------------------------------------------------------------
// 7. Fig. 4 tensor rank decomposition race.

CriterionResult criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const long budget = 6000;
  const double gd_grid[] = {5e-5, 1e-4, 2e-4, 4e-4, 8e-4};

  std::vector<ScenarioConfig> cfgs;
  for (int s = 1; s <= 5; ++s) {
    ScenarioConfig c = registered_config("fig4", "lra");
    c.iters = budget;
    c.seed = static_cast<std::uint64_t>(s);
    cfgs.push_back(std::move(c));
  }
  for (int s = 1; s <= 5; ++s) {
    for (double mu : gd_grid) {
      ScenarioConfig c = registered_config("fig4", "gd");
      c.iters = budget;
      c.seed = static_cast<std::uint64_t>(s);
      c.mu = mu;
      cfgs.push_back(std::move(c));
    }
  }
  const auto curves = run_scenarios(cfgs, 2);

  // A seed is a win when PSGD reaches the 1e-6 relative loss at an iteration
  // budget where no grid step size has brought plain GD there yet.
  int wins = 0;
  std::string per_seed;
  for (int s = 0; s < 5; ++s) {
    const Curve& psgd = curves[s];
    const double loss0 = psgd.points.front().metric;
    const long psgd_hit = psgd.first_iter_at_or_below(1e-6 * loss0);
    long gd_hit = -1;
    for (int g = 0; g < 5; ++g) {
      const Curve& gd = curves[5 + s * 5 + g];
      const long hit = gd.first_iter_at_or_below(1e-6 * gd.points.front().metric);
      if (hit >= 0 && (gd_hit < 0 || hit < gd_hit)) gd_hit = hit;
    }
    const bool win = psgd_hit >= 0 && (gd_hit < 0 || psgd_hit < gd_hit);
    wins += win ? 1 : 0;
    per_seed += fmt("%s[s%d psgd@%ld best-gd@%ld]", per_seed.empty() ? "" : " ", s + 1, psgd_hit,
                    gd_hit);
  }
  std::vector<Clause> clauses;
  clauses.push_back({wins >= 4, fmt("PSGD-LRA first to 1e-6 rel loss on %d/5 seeds: %s", wins,
                                    per_seed.c_str())});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  clauses.push_back({secs <= 900.0, fmt("runtime %.0f s (want <= 900)", secs)});
  return combine(7, "fig4-tensor-rank-decomposition", clauses);
}

// ---------------------------------------------------------------------------
// 8. Oracle equivalences: fixed points, structured apply, scalar recursions.

CriterionResult criterion8() {
  std::vector<Clause> clauses;
  CounterRng rng(88);

  // Per-sample updates vanish at P = (H^2)^{-1/2} with exact pairs. Each
  // probe pair steps a fresh copy of the optimum state, measuring the update
  // itself rather than accumulated round-off drift.
  {
    const std::size_t n = 6;
    const Matrix h = random_spd(n, rng);
    const Matrix qstar = spd_power(h, -0.5);   // symmetric factor of H^{-1}
    const Matrix pstar = spd_power(h, -1.0);
    const Matrix tri_star = qr_upper_factor(qstar);
    const double qs = frobenius_norm(qstar), ps = frobenius_norm(pstar);
    double worst = 0.0;
    const auto track = [&](double rel) { worst = std::max(worst, rel); };

    for (int k = 0; k < 100; ++k) {
      const Vector v = rng.normal_vector(n);
      const HvpPair pair{v, matvec(h, v)};
      DenseQState gl(qstar, 0.0);
      gl.step(pair, 1.0);
      track(frobenius_distance(gl.q(), qstar) / qs);
      TriangularQState tri(tri_star, 0.0, TriangularMode::kExactQr);
      tri.step(pair, 1.0);
      track(frobenius_distance(tri.q(), tri_star) / qs);
      LipschitzTracker t1(0.0), t2(0.0), t3(0.0), t4(0.0);
      track(frobenius_distance(qeq_step(qstar, t1, pair, 0.1), qstar) / qs);
      track(frobenius_distance(quad1_step(qstar, t2, pair, 0.1), qstar) / qs);
      track(frobenius_distance(quad2_step(qstar, t3, pair, 0.1), qstar) / qs);
      track(frobenius_distance(qep_step(qstar, t4, pair, 1.0), qstar) / qs);
      track(frobenius_distance(euclid_sgd_step(pstar, pair, 0.01), pstar) / ps);
      track(frobenius_distance(spd_manifold_step(pstar, pair, 0.01), pstar) / ps);
      track(frobenius_distance(bfgs_step(pstar, pair), pstar) / ps);
    }

    // Diagonal, Kronecker and low-rank forms at matching structured optima.
    {
      Vector lam(n);
      for (double& x : lam) x = 0.3 + 2.0 * rng.uniform();
      Vector q_init(n);
      for (std::size_t i = 0; i < n; ++i) q_init[i] = std::pow(lam[i], -0.5);
      for (int k = 0; k < 100; ++k) {
        const Vector v = rng.normal_vector(n);
        Vector hv(n);
        for (std::size_t i = 0; i < n; ++i) hv[i] = lam[i] * v[i];
        const DiagonalQ stepped = diag_step(DiagonalQ(q_init, 0.0), {v, hv}, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          track(std::fabs(stepped.q[i] - q_init[i]) / std::fabs(q_init[i]));
        }
      }
    }
    {
      const Matrix h1 = random_spd(3, rng);
      const Matrix h2 = random_spd(3, rng);
      const KronQ kron0(spd_power(h1, -0.5), spd_power(h2, -0.5), 0.0, KronMode::kQr);
      for (int k = 0; k < 60; ++k) {
        const Vector v = rng.normal_vector(9);
        const Vector hv = vec((h1 * uvec(v, 3, 3)) * transpose(h2));
        const KronQ stepped = kron_step(kron0, {v, hv}, 1.0);
        track(frobenius_distance(stepped.q1, kron0.q1) / frobenius_norm(kron0.q1));
        track(frobenius_distance(stepped.q2, kron0.q2) / frobenius_norm(kron0.q2));
      }
    }
    {
      LraQ lra0 = LraQ::random_init(8, 1, 1.0, rng);
      for (std::size_t i = 0; i < 8; ++i) lra0.d[i] = 0.5 + rng.uniform();
      const Matrix hl = spd_power(symmetrize(lra0.dense_preconditioner()), -1.0);
      for (int k = 0; k < 60; ++k) {
        const Vector v = rng.normal_vector(8);
        LraQ stepped = lra_step(lra0, {v, matvec(hl, v)}, 1.0);
        for (std::size_t i = 0; i < 8; ++i) track(std::fabs(stepped.d[i] - lra0.d[i]));
        track(frobenius_distance(stepped.u, lra0.u) / (1.0 + frobenius_norm(lra0.u)));
        track(frobenius_distance(stepped.v, lra0.v) / (1.0 + frobenius_norm(lra0.v)));
        lra0.update_u_next = !lra0.update_u_next;  // exercise both group turns
      }
    }
    clauses.push_back(
        {worst <= 1e-12,
         fmt("largest per-sample update at the optimum %.3g (want <= 1e-12)", worst)});
  }

  // Structured preconditioner apply against the dense oracle.
  {
    double worst = 0.0;
    DiagonalQ diag(Vector{0.5, -1.25, 2.0, 0.75}, 0.0);
    const Vector g4 = rng.normal_vector(4);
    const Vector d_direct = precond_grad(diag, g4);
    const Vector d_dense = matvec(diag.dense_preconditioner(), g4);
    for (int i = 0; i < 4; ++i) worst = std::max(worst, std::fabs(d_direct[i] - d_dense[i]));

    Matrix q1(3, 3), q2(3, 3);
    for (double& x : q1.data()) x = rng.normal();
    for (double& x : q2.data()) x = rng.normal();
    KronQ kron(q1, q2);
    const Vector g9 = rng.normal_vector(9);
    const Vector k_direct = precond_grad(kron, g9);
    const Vector k_dense = matvec(kron.dense_preconditioner(), g9);
    for (int i = 0; i < 9; ++i) worst = std::max(worst, std::fabs(k_direct[i] - k_dense[i]));

    LraQ lra = LraQ::random_init(9, 3, 1.0, rng);
    for (double& x : lra.u.data()) x = rng.normal();
    for (double& x : lra.v.data()) x = 0.4 * rng.normal();
    const Vector l_direct = precond_grad(lra, g9);
    const Vector l_dense = matvec(lra.dense_preconditioner(), g9);
    for (int i = 0; i < 9; ++i) worst = std::max(worst, std::fabs(l_direct[i] - l_dense[i]));
    clauses.push_back(
        {worst <= 1e-12, fmt("sparse apply vs dense oracle %.3g (want <= 1e-12)", worst)});
  }

  // Scalar recursions, exact values.
  {
    double worst = 0.0;
    DenseQState gl1(Matrix::identity(1), 0.0);
    gl1.step({{1}, {4}}, 1.0);
    worst = std::max(worst, std::fabs(gl1.q()(0, 0) - 2.0 / 17.0));
    worst = std::max(worst,
                     std::fabs(newton_schulz_step(Matrix(1, 1, {0.5}), Matrix(1, 1, {1.0}))(0, 0) -
                               0.6875));
    LipschitzTracker tq2(0.0);
    worst = std::max(
        worst, std::fabs(quad2_step(Matrix(1, 1, {1.0}), tq2, {{1}, {2}}, 0.1)(0, 0) - 0.9409));
    LipschitzTracker tqe(0.0);
    worst = std::max(worst,
                     std::fabs(qep_step(Matrix(1, 1, {1.0}), tqe, {{1}, {2}}, 1.0)(0, 0) - 0.4));
    RunningClosedForm rcf(Matrix(1, 1, {1.0}));
    rcf.update({2.0});
    worst = std::max(worst, std::fabs(rcf.preconditioner()(0, 0) - 1.0 / std::sqrt(2.5)));
    clauses.push_back({worst <= 1e-15, fmt("scalar recursions drift %.3g (want <= 1e-15)", worst)});
  }
  return combine(8, "oracle-equivalences", clauses);
}

// ---------------------------------------------------------------------------
// 9. Numerics: gradients, rotations, balancing, spectral estimates.

CriterionResult criterion9() {
  std::vector<Clause> clauses;
  CounterRng rng(99);

  {
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t n = 3 + trial;
      const Matrix p = random_spd(n, rng);
      const HvpPair pair{rng.normal_vector(n), rng.normal_vector(n)};
      const Matrix g = criterion_gradient(p, pair);
      const double delta = 1e-6;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          Matrix plus = p, minus = p;
          plus(i, j) += delta;
          minus(i, j) -= delta;
          if (i != j) {
            plus(j, i) += delta;
            minus(j, i) -= delta;
          }
          const double fd =
              (criterion_eval(plus, pair) - criterion_eval(minus, pair)) / (2 * delta);
          const double analytic = (i == j ? 1.0 : 2.0) * g(i, j);
          const double scale = std::max({1.0, std::fabs(fd), std::fabs(analytic)});
          worst = std::max(worst, std::fabs(fd - analytic) / scale);
        }
      }
    }
    clauses.push_back({worst <= 1e-5,
                       fmt("criterion gradient vs finite differences %.3g (want <= 1e-5)", worst)});
  }

  {
    double worst = 0.0;
    for (int order = 2; order <= 4; ++order) {
      for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = trial % 2 == 0 ? 8 : 24;
        Matrix q(n, n);
        for (double& x : q.data()) x = rng.normal();
        if (lu_determinant(q) < 0) {
          for (std::size_t j = 0; j < n; ++j) q(0, j) = -q(0, j);
        }
        const Matrix rotated = procrustes_rotate(q, order);
        const Matrix omega = rotated * lu_inverse(q);
        Matrix defect = transpose(omega) * omega;
        for (std::size_t i = 0; i < n; ++i) defect(i, i) -= 1.0;
        worst = std::max(worst, spectral_norm_exact(defect));
      }
    }
    clauses.push_back(
        {worst <= 1e-3, fmt("procrustes orthogonality defect %.3g (want <= 1e-3)", worst)});
  }

  {
    // Product drift of the balancing step, on random states and along a
    // fitting trajectory.
    double worst_rel = 0.0;
    const double mu = 0.25;
    const auto check = [&](const LraQ& state) {
      const Matrix before = state.u * transpose(state.v);
      LraQ after = lra_balance(state, mu);
      const Matrix drift = after.u * transpose(after.v) - before;
      const double bound = 0.25 * std::pow(mu, 4) * sigma_max_oracle(before) + 1e-300;
      worst_rel = std::max(worst_rel, sigma_max_oracle(drift) / bound);
    };
    for (int trial = 0; trial < 10; ++trial) {
      LraQ state = LraQ::random_init(12, 3, 1.0, rng);
      for (double& x : state.u.data()) x = rng.normal();
      for (double& x : state.v.data()) x = 0.3 * rng.normal();
      check(state);
    }
    {
      const Matrix h = random_spd(10, rng);
      LraQ state = LraQ::random_init(10, 2, 1.0, rng);
      for (int t = 0; t < 2000; ++t) {
        const Vector v = rng.normal_vector(10);
        state = lra_step(std::move(state), {v, matvec(h, v)}, 0.5);
        if (t % 100 == 99) check(state);
      }
    }
    clauses.push_back({worst_rel <= 1.0,
                       fmt("balance drift / (0.25 mu^4 ||UV'||) = %.3g (want <= 1)", worst_rel)});
  }

  {
    bool ok = true;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Matrix a(100, 100);
      for (double& x : a.data()) x = rng.normal();
      const double est = estimate_spectral_norm(a, 32, 4, rng);
      const double sigma = sigma_max_oracle(a);
      const double ratio = est / sigma;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      ok = ok && est >= 0.9 * sigma && est <= sigma * (1.0 + 1e-10);
    }
    clauses.push_back(
        {ok, fmt("spectral estimate ratio in [%.4f, %.4f] over 20 draws (want [0.9, 1])", lo, hi)});
  }
  return combine(9, "numerics", clauses);
}

// ---------------------------------------------------------------------------
// 10. Determinism of scenario runs.

CriterionResult criterion10() {
  ScenarioConfig cfg = registered_config("fig1", "gl");
  cfg.iters = 5000;
  cfg.seed = 7;
  const std::string a = curve_to_csv(run_scenario(cfg));
  const std::string b = curve_to_csv(run_scenario(cfg));
  std::vector<Clause> clauses;
  clauses.push_back({a == b && !a.empty(),
                     fmt("two runs, one seed: %zu CSV bytes, byte-identical: %s", a.size(),
                         a == b ? "yes" : "no")});
  return combine(10, "determinism", clauses);
}

}  // namespace

std::string CriterionResult::line() const {
  return std::string(pass ? "[PASS] " : "[FAIL] ") + std::to_string(number) + ". " + name + ": " +
         detail;
}

CriterionResult run_criterion(int number) {
  switch (number) {
    case 1: return criterion1();
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5();
    case 6: return criterion6();
    case 7: return criterion7();
    case 8: return criterion8();
    case 9: return criterion9();
    case 10: return criterion10();
    default:
      throw InvalidArgumentError("acceptance criterion number must be 1..10");
  }
}

std::vector<CriterionResult> run_acceptance(
    const std::function<void(const CriterionResult&)>& on_done) {
  std::vector<CriterionResult> results;
  for (int k = 1; k <= 10; ++k) {
    results.push_back(run_criterion(k));
    if (on_done) on_done(results.back());
  }
  return results;
}

}  // namespace hessfit
