/* C interface to the hessfit preconditioner-fitting library.
 *
 * All entry points return a hessfit_status; every object is an opaque
 * handle created and destroyed through this interface. Handles are not
 * thread-safe individually, but independent handles may be used from
 * different threads concurrently.
 */
#ifndef HESSFIT_H
#define HESSFIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HESSFIT_API __declspec(dllexport)
#else
#define HESSFIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hessfit_status {
  HESSFIT_OK = 0,
  HESSFIT_ERR_INVALID_ARGUMENT = 1,
  HESSFIT_ERR_UNKNOWN_NAME = 2,
  HESSFIT_ERR_DIMENSION = 3,
  HESSFIT_ERR_SINGULAR = 4,
  HESSFIT_ERR_NOT_POSITIVE_DEFINITE = 5,
  HESSFIT_ERR_NOT_SYMMETRIC = 6,
  HESSFIT_ERR_CURVATURE = 7,
  HESSFIT_ERR_DIVERGED = 8,
  HESSFIT_ERR_IO = 9,
  HESSFIT_ERR_INTERNAL = 10
} hessfit_status;

typedef struct hessfit_scenario hessfit_scenario;
typedef struct hessfit_curve hessfit_curve;

/* Static description of a status code. */
HESSFIT_API const char* hessfit_status_string(hessfit_status status);

/* Message of the last error raised on the calling thread, or "". */
HESSFIT_API const char* hessfit_last_error(void);

HESSFIT_API const char* hessfit_version(void);

/* ---- scenario registry ------------------------------------------------ */

HESSFIT_API int hessfit_registry_count(void);
HESSFIT_API hessfit_status hessfit_registry_get(int index, char* scenario, size_t scenario_cap,
                                                char* method, size_t method_cap, char* description,
                                                size_t description_cap);

/* ---- scenario configuration and execution ----------------------------- */

/* Creates a configuration pre-filled with the registered defaults for the
 * (scenario, method) pair. */
HESSFIT_API hessfit_status hessfit_scenario_create(const char* scenario, const char* method,
                                                   hessfit_scenario** out);
HESSFIT_API void hessfit_scenario_free(hessfit_scenario* cfg);

HESSFIT_API hessfit_status hessfit_scenario_set_iters(hessfit_scenario* cfg, long iters);
HESSFIT_API hessfit_status hessfit_scenario_set_seed(hessfit_scenario* cfg, uint64_t seed);
HESSFIT_API hessfit_status hessfit_scenario_set_mu(hessfit_scenario* cfg, double mu);
HESSFIT_API hessfit_status hessfit_scenario_set_beta(hessfit_scenario* cfg, double beta);
HESSFIT_API hessfit_status hessfit_scenario_set_sigma_eps(hessfit_scenario* cfg, double sigma_eps);
/* Wall-clock timestamps in the CSV are all zero unless timing is enabled;
 * disabled timing keeps runs byte-reproducible. */
HESSFIT_API hessfit_status hessfit_scenario_set_timing(hessfit_scenario* cfg, int enabled);
HESSFIT_API hessfit_status hessfit_scenario_set_extra(hessfit_scenario* cfg, const char* key,
                                                      const char* value);

HESSFIT_API hessfit_status hessfit_scenario_run(const hessfit_scenario* cfg, hessfit_curve** out);

/* ---- results ----------------------------------------------------------- */

HESSFIT_API long hessfit_curve_size(const hessfit_curve* curve);
HESSFIT_API hessfit_status hessfit_curve_point(const hessfit_curve* curve, long index, long* iter,
                                               double* metric, long long* wall_ns, int* diverged);
HESSFIT_API int hessfit_curve_diverged(const hessfit_curve* curve);
HESSFIT_API hessfit_status hessfit_curve_write_csv(const hessfit_curve* curve, const char* path);
/* CSV bytes as a NUL-terminated string; free with hessfit_string_free. */
HESSFIT_API hessfit_status hessfit_curve_csv_alloc(const hessfit_curve* curve, char** out);
HESSFIT_API void hessfit_string_free(char* s);
HESSFIT_API void hessfit_curve_free(hessfit_curve* curve);

/* ---- acceptance suite --------------------------------------------------- */

/* Called once per acceptance criterion with a human-readable result line. */
typedef void (*hessfit_report_fn)(const char* line, void* user);

/* Runs the complete acceptance suite. Reports one line per criterion and
 * stores the number of failed criteria in *failures (when non-NULL).
 * criterion == 0 runs everything, 1..10 a single criterion. */
HESSFIT_API hessfit_status hessfit_verify_run(int criterion, hessfit_report_fn report, void* user,
                                              int* failures);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HESSFIT_H */
