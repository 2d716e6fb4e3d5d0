#include <cmath>

#include "doctest.h"
#include "hessfit/bench.hpp"
#include "hessfit/linalg.hpp"
#include "oracles.hpp"

using namespace hessfit;

TEST_CASE("make_hessian: pinned entries and spectra") {
  const Matrix h3 = make_hessian(HessianKind::kHilbert3, 0);
  CHECK(h3(0, 0) == doctest::Approx(1.0));
  CHECK(h3(2, 2) == doctest::Approx(0.2));
  CHECK(h3(0, 2) == doctest::Approx(1.0 / 3.0));

  const Matrix t50 = make_hessian(HessianKind::kTridiag50, 0);
  CHECK(t50.rows() == 50);
  const auto ev = oracles::sym_eigenvalues(t50);
  CHECK(ev.front() > 0.0);
  CHECK(ev.back() < 2.0);

  const Matrix h64 = make_hessian(HessianKind::kHilb64Reg, 0);
  CHECK(oracles::lambda_min(h64) >= 1e-6 * (1 - 1e-9));

  const Matrix tv = make_hessian(HessianKind::kTimeVarying, 0);
  CHECK(tv(0, 0) == 0.25);
  CHECK(tv(13, 37) == 0.25);
}

TEST_CASE("time-varying process accumulates rank-one bumps") {
  TimeVaryingHessian process(8, CounterRng(5, 3));
  const Matrix h0 = process.current();
  process.advance();
  const Matrix h1 = process.current();
  Matrix diff = h1;
  diff -= h0;
  // u u' with u in [0,1)^n: PSD of rank one, entries in [0, 1).
  CHECK(oracles::lambda_min(symmetrize(diff)) >= -1e-12);
  const auto ev = oracles::sym_eigenvalues(symmetrize(diff));
  int positive = 0;
  for (double lam : ev) {
    if (lam > 1e-10) ++positive;
  }
  CHECK(positive == 1);
}

TEST_CASE("fit_loglog_slope: synthetic power laws") {
  std::vector<CurvePoint> points;
  for (long t = 1; t <= 3000; ++t) {
    points.push_back({t, 1.0 / std::sqrt(static_cast<double>(t)), 0, false});
  }
  CHECK(fit_loglog_slope(points, 1, 3000) == doctest::Approx(-0.5).epsilon(1e-6));

  for (auto& p : points) p.metric = 1.0 / static_cast<double>(p.iter);
  CHECK(fit_loglog_slope(points, 1, 3000) == doctest::Approx(-1.0).epsilon(1e-6));

  // Geometric decay has no stable log-log slope: steeper over later windows.
  for (auto& p : points) p.metric = std::pow(0.99, static_cast<double>(p.iter));
  const double early = fit_loglog_slope(points, 1, 300);
  const double late = fit_loglog_slope(points, 300, 3000);
  CHECK(late < early);

  CHECK_THROWS_AS(fit_loglog_slope(points, 1, 5), InvalidArgumentError);
  points[40].metric = 0.0;
  CHECK_THROWS_AS(fit_loglog_slope(points, 1, 3000), InvalidArgumentError);
}

TEST_CASE("registry covers every reproduced figure and resolves defaults") {
  const auto& reg = scenario_registry();
  CHECK(reg.size() >= 25);
  const char* needed[][2] = {
      {"fig1", "euclid"}, {"fig1", "closed_form"}, {"fig1", "newton"}, {"fig1", "spd"},
      {"fig1", "gl"},     {"fig2a", "gl"},         {"fig2a", "tri"},   {"fig2b", "bfgs"},
      {"fig2c", "closed_form"}, {"fig3", "qep"},   {"fig3", "quad2"},  {"fig4", "gd"},
      {"fig4", "lra"},
  };
  for (const auto& pair : needed) {
    bool found = false;
    for (const auto& entry : reg) {
      if (entry.scenario == pair[0] && entry.method == pair[1]) found = true;
    }
    CHECK_MESSAGE(found, pair[0], "/", pair[1]);
  }

  const ScenarioConfig cfg = registered_config("fig1", "gl");
  CHECK(cfg.n == 3);
  CHECK(cfg.iters == 20000);
  CHECK(cfg.mu == 1.0);
  CHECK_THROWS_AS(registered_config("fig9", "gl"), InvalidArgumentError);
  CHECK_THROWS_AS(registered_config("fig1", "nope"), InvalidArgumentError);
}

TEST_CASE("run_scenario: deterministic bytes and sane curves") {
  ScenarioConfig cfg = registered_config("fig1", "gl");
  cfg.iters = 1500;
  cfg.seed = 42;
  const Curve a = run_scenario(cfg);
  const Curve b = run_scenario(cfg);
  CHECK(curve_to_csv(a) == curve_to_csv(b));
  CHECK(a.points.front().iter == 0);
  CHECK(a.points.back().iter == 1500);
  // Logging cadence: every iteration below 1000, every 10th after.
  CHECK(a.points[1].iter == 1);
  CHECK(a.points[999].iter == 999);
  CHECK(a.points[1000].iter == 1000);
  CHECK(a.points[1001].iter == 1010);
  CHECK(a.final_metric() < a.points.front().metric);
  for (const auto& p : a.points) CHECK(p.wall_ns == 0);

  cfg.timing = true;
  const Curve timed = run_scenario(cfg);
  CHECK(timed.points.back().wall_ns > 0);
}

TEST_CASE("run_scenario: newton on fig1 records the round-off escape as divergence") {
  // In exact arithmetic this run reaches machine precision by step 29; in
  // double precision the non-commuting round-off error is amplified each
  // step and the iterate escapes after bottoming out near 5e-2. The runner
  // must flag it instead of crashing.
  ScenarioConfig cfg = registered_config("fig1", "newton");
  const Curve c = run_scenario(cfg);
  CHECK(c.diverged);
  CHECK(c.min_metric() < 0.1);
  CHECK(c.min_metric() > 1e-3);
  bool flagged_point = false;
  for (const auto& p : c.points) flagged_point = flagged_point || p.diverged;
  CHECK(flagged_point);
}

TEST_CASE("run_scenario: BFGS error climbs from its minimum under noisy pairs") {
  ScenarioConfig cfg = registered_config("fig2b", "bfgs");
  cfg.iters = 30000;
  const Curve c = run_scenario(cfg);
  // The secant fit amplifies the curvature noise: the error rises well above
  // the best value it ever reached, while the group fitter keeps improving.
  CHECK(c.final_metric() > 3.0 * c.min_metric());

  ScenarioConfig gl_cfg = registered_config("fig2b", "gl");
  gl_cfg.iters = 30000;
  const Curve g = run_scenario(gl_cfg);
  CHECK(g.final_metric() < 3.0 * g.min_metric());
  CHECK(g.final_metric() < c.final_metric());
}

TEST_CASE("run_scenarios preserves input order under the worker pool") {
  std::vector<ScenarioConfig> configs;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    ScenarioConfig cfg = registered_config("fig1", "gl");
    cfg.iters = 400;
    cfg.seed = s;
    configs.push_back(cfg);
  }
  const auto curves = run_scenarios(configs, 2);
  REQUIRE(curves.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(curves[i].seed == i + 1);
    const Curve solo = run_scenario(configs[i]);
    CHECK(curve_to_csv(solo) == curve_to_csv(curves[i]));
  }
  const auto mean = average_curves(curves);
  CHECK(mean.size() == curves[0].points.size());
}

TEST_CASE("csv format: header, %.17g metric, LF endings") {
  ScenarioConfig cfg = registered_config("fig1", "gl");
  cfg.iters = 20;
  cfg.seed = 3;
  const Curve c = run_scenario(cfg);
  const std::string csv = curve_to_csv(c);
  CHECK(csv.rfind("scenario,method,seed,iter,metric,wall_ns\n", 0) == 0);
  CHECK(csv.find("\r") == std::string::npos);
  CHECK(csv.find("fig1,gl,3,0,") != std::string::npos);
  // 17 significant digits survive the round trip.
  const double val = c.points[5].metric;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", val);
  CHECK(csv.find(buf) != std::string::npos);
  CHECK(std::stod(buf) == val);
}

TEST_CASE("group fitters decay log-linearly on the Hilbert-3 scenario") {
  for (const char* method : {"gl", "tri"}) {
    ScenarioConfig cfg = registered_config("fig1", method);
    cfg.iters = 6000;
    cfg.seed = 2;
    const Curve c = run_scenario(cfg);
    CHECK(c.min_metric() < 1e-8);
    // Straight line in semilog coordinates until the machine floor.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    long n = 0;
    for (const auto& p : c.points) {
      if (p.iter < 1 || !(p.metric > 1e-12)) continue;
      const double x = static_cast<double>(p.iter);
      const double y = std::log10(p.metric);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      syy += y * y;
      ++n;
    }
    REQUIRE(n > 100);
    const double cov = n * sxy - sx * sy;
    const double r2 = (cov * cov) / ((n * sxx - sx * sx) * (n * syy - sy * sy));
    CHECK(r2 >= 0.95);
  }
}

TEST_CASE("fitting_error: identity preconditioner against identity target is zero") {
  CHECK(fitting_error(Matrix::identity(5), Matrix::identity(5)) == 0.0);
  const Matrix h = make_hessian(HessianKind::kHilbert3, 0);
  const Matrix p = oracles::spd_power(h, -1.0);
  CHECK(fitting_error(p, h) < 1e-12);
}
