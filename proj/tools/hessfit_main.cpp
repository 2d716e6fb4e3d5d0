// Benchmark CLI. Talks to the library exclusively through the C API in
// hessfit.h.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hessfit.h"

namespace {

int fail(hessfit_status status) {
  std::fprintf(stderr, "error: %s", hessfit_status_string(status));
  const char* detail = hessfit_last_error();
  if (detail != nullptr && detail[0] != '\0') std::fprintf(stderr, " (%s)", detail);
  std::fprintf(stderr, "\n");
  return 1;
}

struct ScenarioGuard {
  hessfit_scenario* ptr = nullptr;
  ~ScenarioGuard() { hessfit_scenario_free(ptr); }
};

struct CurveGuard {
  hessfit_curve* ptr = nullptr;
  ~CurveGuard() { hessfit_curve_free(ptr); }
};

int cmd_list() {
  const int count = hessfit_registry_count();
  std::printf("%-8s %-12s %s\n", "scenario", "method", "description");
  for (int i = 0; i < count; ++i) {
    char scenario[32], method[32], description[160];
    if (hessfit_registry_get(i, scenario, sizeof scenario, method, sizeof method, description,
                             sizeof description) != HESSFIT_OK) {
      continue;
    }
    std::printf("%-8s %-12s %s\n", scenario, method, description);
  }
  return 0;
}

int cmd_run(const std::string& scenario, const std::string& method, long iters, uint64_t seed,
            double mu, double beta, double sigma_eps, bool timing,
            const std::vector<std::string>& extras, const std::string& out_path) {
  ScenarioGuard cfg;
  hessfit_status st = hessfit_scenario_create(scenario.c_str(), method.c_str(), &cfg.ptr);
  if (st != HESSFIT_OK) return fail(st);

  if (iters > 0 && (st = hessfit_scenario_set_iters(cfg.ptr, iters)) != HESSFIT_OK) return fail(st);
  if ((st = hessfit_scenario_set_seed(cfg.ptr, seed)) != HESSFIT_OK) return fail(st);
  if (mu >= 0.0 && (st = hessfit_scenario_set_mu(cfg.ptr, mu)) != HESSFIT_OK) return fail(st);
  if (beta >= 0.0 && (st = hessfit_scenario_set_beta(cfg.ptr, beta)) != HESSFIT_OK) return fail(st);
  if (sigma_eps >= 0.0 && (st = hessfit_scenario_set_sigma_eps(cfg.ptr, sigma_eps)) != HESSFIT_OK) {
    return fail(st);
  }
  if ((st = hessfit_scenario_set_timing(cfg.ptr, timing ? 1 : 0)) != HESSFIT_OK) return fail(st);
  for (const std::string& kv : extras) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --extra expects key=value, got '%s'\n", kv.c_str());
      return 1;
    }
    st = hessfit_scenario_set_extra(cfg.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != HESSFIT_OK) return fail(st);
  }

  CurveGuard curve;
  if ((st = hessfit_scenario_run(cfg.ptr, &curve.ptr)) != HESSFIT_OK) return fail(st);

  if (out_path.empty()) {
    char* csv = nullptr;
    if ((st = hessfit_curve_csv_alloc(curve.ptr, &csv)) != HESSFIT_OK) return fail(st);
    std::fputs(csv, stdout);
    hessfit_string_free(csv);
  } else {
    if ((st = hessfit_curve_write_csv(curve.ptr, out_path.c_str())) != HESSFIT_OK) return fail(st);
    std::fprintf(stderr, "wrote %ld points to %s\n", hessfit_curve_size(curve.ptr),
                 out_path.c_str());
  }
  if (hessfit_curve_diverged(curve.ptr) != 0) {
    std::fprintf(stderr, "note: divergence flagged during this run\n");
  }
  return 0;
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

int cmd_verify(int criterion) {
  int failures = 0;
  const hessfit_status st = hessfit_verify_run(criterion, print_line, nullptr, &failures);
  if (st != HESSFIT_OK) return fail(st);
  if (failures > 0) {
    std::fprintf(stderr, "%d criterion(s) failed\n", failures);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Hessian/preconditioner fitting benchmarks"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "enumerate registered scenario/method pairs");

  auto* run = app.add_subcommand("run", "run one scenario and emit a CSV convergence log");
  std::string scenario, method, out_path;
  long iters = 0;
  uint64_t seed = 1;
  double mu = -1.0, beta = -1.0, sigma_eps = -1.0;
  bool timing = false;
  std::vector<std::string> extras;
  run->add_option("--scenario", scenario, "scenario name (see `hessfit list`)")->required();
  run->add_option("--method", method, "fitter or optimizer name")->required();
  run->add_option("--iters", iters, "iteration count (default: scenario preset)");
  run->add_option("--seed", seed, "random seed (default 1)");
  run->add_option("--mu", mu, "step size override");
  run->add_option("--beta", beta, "step-size tracker averaging factor");
  run->add_option("--sigma-eps", sigma_eps, "curvature noise level override");
  run->add_flag("--timing", timing, "record wall-clock nanoseconds (breaks byte reproducibility)");
  run->add_option("--extra", extras, "additional key=value settings (repeatable)");
  run->add_option("--out", out_path, "CSV output path (default: stdout)");

  auto* verify = app.add_subcommand("verify", "run the acceptance suite; nonzero exit on failure");
  int criterion = 0;
  verify->add_option("--criterion", criterion, "run a single criterion (1-10; default all)")
      ->check(CLI::Range(0, 10));

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) return cmd_list();
  if (run->parsed()) {
    return cmd_run(scenario, method, iters, seed, mu, beta, sigma_eps, timing, extras, out_path);
  }
  if (verify->parsed()) return cmd_verify(criterion);
  return 0;
}
