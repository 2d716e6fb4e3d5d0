#include "hessfit.h"

#include <cstring>
#include <new>
#include <string>

#include "hessfit/bench.hpp"
#include "hessfit/errors.hpp"
#include "hessfit/verify.hpp"

struct hessfit_scenario {
  hessfit::ScenarioConfig cfg;
};

struct hessfit_curve {
  hessfit::Curve curve;
};

namespace {

thread_local std::string g_last_error;

void copy_out(const std::string& s, char* buf, size_t cap) {
  if (buf == nullptr || cap == 0) return;
  const size_t n = std::min(cap - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

template <typename Fn>
hessfit_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HESSFIT_OK;
  } catch (const hessfit::DimensionError& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_DIMENSION;
  } catch (const hessfit::SingularError& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_SINGULAR;
  } catch (const hessfit::DefinitenessError& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_NOT_POSITIVE_DEFINITE;
  } catch (const hessfit::SymmetryError& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_NOT_SYMMETRIC;
  } catch (const hessfit::CurvatureError& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_CURVATURE;
  } catch (const hessfit::DivergenceError& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_DIVERGED;
  } catch (const hessfit::InvalidArgumentError& e) {
    g_last_error = e.what();
    // Unknown scenario/method names surface as a dedicated code.
    if (g_last_error.find("unknown") != std::string::npos) return HESSFIT_ERR_UNKNOWN_NAME;
    return HESSFIT_ERR_INVALID_ARGUMENT;
  } catch (const hessfit::Error& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_INTERNAL;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HESSFIT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HESSFIT_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* hessfit_status_string(hessfit_status status) {
  switch (status) {
    case HESSFIT_OK: return "ok";
    case HESSFIT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HESSFIT_ERR_UNKNOWN_NAME: return "unknown scenario or method name";
    case HESSFIT_ERR_DIMENSION: return "dimension mismatch";
    case HESSFIT_ERR_SINGULAR: return "singular matrix";
    case HESSFIT_ERR_NOT_POSITIVE_DEFINITE: return "matrix not positive definite";
    case HESSFIT_ERR_NOT_SYMMETRIC: return "matrix not symmetric";
    case HESSFIT_ERR_CURVATURE: return "curvature condition failed";
    case HESSFIT_ERR_DIVERGED: return "iteration diverged";
    case HESSFIT_ERR_IO: return "i/o error";
    case HESSFIT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* hessfit_last_error(void) { return g_last_error.c_str(); }

const char* hessfit_version(void) { return "1.0.0"; }

int hessfit_registry_count(void) {
  return static_cast<int>(hessfit::scenario_registry().size());
}

hessfit_status hessfit_registry_get(int index, char* scenario, size_t scenario_cap, char* method,
                                    size_t method_cap, char* description, size_t description_cap) {
  return guarded([&] {
    const auto& reg = hessfit::scenario_registry();
    if (index < 0 || static_cast<size_t>(index) >= reg.size()) {
      throw hessfit::InvalidArgumentError("registry index out of range");
    }
    copy_out(reg[index].scenario, scenario, scenario_cap);
    copy_out(reg[index].method, method, method_cap);
    copy_out(reg[index].description, description, description_cap);
  });
}

hessfit_status hessfit_scenario_create(const char* scenario, const char* method,
                                       hessfit_scenario** out) {
  return guarded([&] {
    if (scenario == nullptr || method == nullptr || out == nullptr) {
      throw hessfit::InvalidArgumentError("null argument");
    }
    auto handle = new hessfit_scenario{hessfit::registered_config(scenario, method)};
    *out = handle;
  });
}

void hessfit_scenario_free(hessfit_scenario* cfg) { delete cfg; }

#define HESSFIT_SETTER(name, field, type)                                        \
  hessfit_status hessfit_scenario_set_##name(hessfit_scenario* cfg, type value) { \
    return guarded([&] {                                                          \
      if (cfg == nullptr) throw hessfit::InvalidArgumentError("null scenario");   \
      cfg->cfg.field = value;                                                     \
    });                                                                           \
  }

HESSFIT_SETTER(iters, iters, long)
HESSFIT_SETTER(seed, seed, uint64_t)
HESSFIT_SETTER(mu, mu, double)
HESSFIT_SETTER(beta, beta, double)
HESSFIT_SETTER(sigma_eps, sigma_eps, double)

#undef HESSFIT_SETTER

hessfit_status hessfit_scenario_set_timing(hessfit_scenario* cfg, int enabled) {
  return guarded([&] {
    if (cfg == nullptr) throw hessfit::InvalidArgumentError("null scenario");
    cfg->cfg.timing = enabled != 0;
  });
}

hessfit_status hessfit_scenario_set_extra(hessfit_scenario* cfg, const char* key,
                                          const char* value) {
  return guarded([&] {
    if (cfg == nullptr || key == nullptr || value == nullptr) {
      throw hessfit::InvalidArgumentError("null argument");
    }
    cfg->cfg.extra[key] = value;
  });
}

hessfit_status hessfit_scenario_run(const hessfit_scenario* cfg, hessfit_curve** out) {
  return guarded([&] {
    if (cfg == nullptr || out == nullptr) throw hessfit::InvalidArgumentError("null argument");
    auto curve = new hessfit_curve{hessfit::run_scenario(cfg->cfg)};
    *out = curve;
  });
}

long hessfit_curve_size(const hessfit_curve* curve) {
  return curve == nullptr ? 0 : static_cast<long>(curve->curve.points.size());
}

hessfit_status hessfit_curve_point(const hessfit_curve* curve, long index, long* iter,
                                   double* metric, long long* wall_ns, int* diverged) {
  return guarded([&] {
    if (curve == nullptr) throw hessfit::InvalidArgumentError("null curve");
    if (index < 0 || static_cast<size_t>(index) >= curve->curve.points.size()) {
      throw hessfit::InvalidArgumentError("point index out of range");
    }
    const auto& p = curve->curve.points[static_cast<size_t>(index)];
    if (iter != nullptr) *iter = p.iter;
    if (metric != nullptr) *metric = p.metric;
    if (wall_ns != nullptr) *wall_ns = p.wall_ns;
    if (diverged != nullptr) *diverged = p.diverged ? 1 : 0;
  });
}

int hessfit_curve_diverged(const hessfit_curve* curve) {
  return (curve != nullptr && curve->curve.diverged) ? 1 : 0;
}

hessfit_status hessfit_curve_write_csv(const hessfit_curve* curve, const char* path) {
  return guarded([&] {
    if (curve == nullptr || path == nullptr) throw hessfit::InvalidArgumentError("null argument");
    hessfit::write_csv_file(curve->curve, path);
  });
}

hessfit_status hessfit_curve_csv_alloc(const hessfit_curve* curve, char** out) {
  return guarded([&] {
    if (curve == nullptr || out == nullptr) throw hessfit::InvalidArgumentError("null argument");
    const std::string csv = hessfit::curve_to_csv(curve->curve);
    char* buf = new char[csv.size() + 1];
    std::memcpy(buf, csv.data(), csv.size());
    buf[csv.size()] = '\0';
    *out = buf;
  });
}

void hessfit_string_free(char* s) { delete[] s; }

void hessfit_curve_free(hessfit_curve* curve) { delete curve; }

hessfit_status hessfit_verify_run(int criterion, hessfit_report_fn report, void* user,
                                  int* failures) {
  return guarded([&] {
    int failed = 0;
    const auto emit = [&](const hessfit::CriterionResult& r) {
      if (!r.pass) ++failed;
      if (report != nullptr) {
        const std::string line = r.line();
        report(line.c_str(), user);
      }
    };
    if (criterion == 0) {
      hessfit::run_acceptance(emit);
    } else {
      emit(hessfit::run_criterion(criterion));
    }
    if (failures != nullptr) *failures = failed;
  });
}

}  // extern "C"
