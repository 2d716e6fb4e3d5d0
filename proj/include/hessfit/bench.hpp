#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hessfit/matrix.hpp"
#include "hessfit/rng.hpp"

namespace hessfit {

// Named curvature models used by the benchmark scenarios.
enum class HessianKind { kHilbert3, kTridiag50, kHilb64Reg, kTimeVarying };

HessianKind hessian_kind_from_name(const std::string& name);

// Fixed kinds return the matrix; kTimeVarying returns the all-quarters start
// of the random-walk process driven through TimeVaryingHessian.
Matrix make_hessian(HessianKind kind, std::size_t n);

class TimeVaryingHessian {
 public:
  TimeVaryingHessian(std::size_t n, CounterRng rng);
  // H <- H + u u', u_i ~ U(0, 1).
  void advance();
  const Matrix& current() const { return h_; }

 private:
  Matrix h_;
  CounterRng rng_;
};

struct ScenarioConfig {
  std::string scenario = "custom";  // fig1|fig2a|fig2b|fig2c|fig3|fig4|custom
  std::string method;
  std::size_t n = 0;       // 0 -> scenario default
  long iters = 0;          // 0 -> scenario default
  std::uint64_t seed = 1;
  double mu = -1.0;        // < 0 -> registered default
  double beta = -1.0;      // < 0 -> registered default
  double sigma_eps = -1.0; // < 0 -> registered default
  bool timing = false;     // emit real wall_ns instead of zeros
  std::map<std::string, std::string> extra;

  double extra_double(const std::string& key, double fallback) const;
  long extra_long(const std::string& key, long fallback) const;
  std::string extra_string(const std::string& key, const std::string& fallback) const;
};

struct CurvePoint {
  long iter = 0;
  double metric = 0.0;
  long long wall_ns = 0;
  bool diverged = false;
};

struct Curve {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;
  bool diverged = false;       // any flagged point or fitter blow-up
  long skipped_updates = 0;    // e.g. BFGS curvature rejections

  double final_metric() const;
  double min_metric() const;
  // First logged iteration with metric <= target, or -1.
  long first_iter_at_or_below(double target) const;
};

struct RegistryEntry {
  std::string scenario;
  std::string method;
  std::string description;
};

// Every (scenario, method) pair appearing in the reproduced experiments.
const std::vector<RegistryEntry>& scenario_registry();

// Config pre-filled with the registered defaults; throws on unknown names.
ScenarioConfig registered_config(const std::string& scenario, const std::string& method);

Curve run_scenario(const ScenarioConfig& cfg);

// Runs configs on a small worker pool; results keep input order.
std::vector<Curve> run_scenarios(const std::vector<ScenarioConfig>& configs,
                                 std::size_t workers = 2);

// CSV with header scenario,method,seed,iter,metric,wall_ns; metric printed
// with %.17g, LF endings.
std::string curve_to_csv(const Curve& curve);
void write_csv_file(const Curve& curve, const std::string& path);

// Least-squares slope of log(metric) against log(iter) over lo <= iter <= hi.
double fit_loglog_slope(const std::vector<CurvePoint>& points, long lo_iter, long hi_iter);

// Pointwise mean metric across seed runs of one config (identical cadences).
std::vector<CurvePoint> average_curves(const std::vector<Curve>& curves);

// err(P) = ||P H' - I||_F / sqrt(n), the fitting metric shared by the
// benchmark scenarios.
double fitting_error(const Matrix& p, const Matrix& h_true);

}  // namespace hessfit
