#ifndef QHDBOOT_QHDBOOT_H
#define QHDBOOT_QHDBOOT_H

#include <stddef.h>
#include <stdint.h>

#if defined(QHDBOOT_BUILDING_LIBRARY)
#define QHDB_API __attribute__((visibility("default")))
#else
#define QHDB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the nonzero values mirror the library's error kinds. */
typedef enum qhdb_status {
  QHDB_OK = 0,
  QHDB_ERR_INVALID_ARGUMENT = 1,
  QHDB_ERR_EMPTY_SAMPLE = 2,
  QHDB_ERR_LENGTH_MISMATCH = 3,
  QHDB_ERR_LEVEL_OUT_OF_RANGE = 4,
  QHDB_ERR_NORM_INFINITE = 5,
  QHDB_ERR_RANGE_TOO_SMALL = 6,
  QHDB_ERR_LATTICE_MISMATCH = 7,
  QHDB_ERR_NON_INTEGRABLE = 8,
  QHDB_ERR_NON_INTEGRABLE_DIRECTION = 9,
  QHDB_ERR_MOMENT_DIVERGES = 10,
  QHDB_ERR_BLOCK_LENGTH_INVALID = 11,
  QHDB_ERR_PATH_TOO_SHORT = 12,
  QHDB_ERR_FACTORIZATION_FAILED = 13,
  QHDB_ERR_CONFIG_INVALID = 14,
  QHDB_ERR_IO = 15,
  QHDB_ERR_INTERNAL = 99
} qhdb_status;

typedef struct qhdb_step_function qhdb_step_function;

QHDB_API const char* qhdb_version(void);
/* Message of the last failure on the calling thread ("" if none). */
QHDB_API const char* qhdb_last_error(void);

/* knots strictly increasing; values[i] holds on [knots[i], knots[i+1]). */
QHDB_API qhdb_status qhdb_step_function_create(const double* knots, const double* values, size_t n,
                                               double value_at_minus_inf,
                                               qhdb_step_function** out);
QHDB_API qhdb_status qhdb_empirical_cdf(const double* sample, size_t n, qhdb_step_function** out);
QHDB_API void qhdb_step_function_destroy(qhdb_step_function* f);
QHDB_API size_t qhdb_step_function_size(const qhdb_step_function* f);
QHDB_API qhdb_status qhdb_step_function_eval(const qhdb_step_function* f, double x, double* out);
/* sup |f| (1 + |x|)^lambda */
QHDB_API qhdb_status qhdb_weighted_sup_norm(const qhdb_step_function* f, double lambda, double* out);

QHDB_API qhdb_status qhdb_avar(const qhdb_step_function* F, double alpha, double* out);
QHDB_API qhdb_status qhdb_avar_derivative(const qhdb_step_function* F, double alpha, double kink,
                                          const qhdb_step_function* v, double* out);

/* Weight vectors are written to out[0..n-1]. scheme: "efron", "bayesian" or "wild". */
QHDB_API qhdb_status qhdb_exchangeable_weights(const char* scheme, size_t n, uint64_t seed,
                                               double* out);
QHDB_API qhdb_status qhdb_blockwise_weights(size_t n, size_t block_length, uint64_t seed,
                                            double* out);
QHDB_API qhdb_status qhdb_blockwise_expected_weights(size_t n, size_t block_length, double* out);

QHDB_API qhdb_status qhdb_ks_distance(const double* a, size_t na, const double* b, size_t nb,
                                      double* out);
QHDB_API qhdb_status qhdb_wasserstein1(const double* a, size_t na, const double* b, size_t nb,
                                       double* out);

/* *diagnostics receives a newly allocated text (free with qhdb_free_string);
   *has_errors is set to 1 when at least one diagnostic is an error. */
QHDB_API qhdb_status qhdb_validate_config(const char* config_path, char** diagnostics,
                                          int* has_errors);

typedef struct qhdb_run_options {
  size_t threads;     /* 0: QHD_BOOT_THREADS or hardware concurrency */
  int has_seed;       /* nonzero: seed overrides the config */
  uint64_t seed;
  const char* format; /* "csv", "json", "both" or NULL (both) */
} qhdb_run_options;

/* Runs a subcommand. *exit_code follows the CLI contract (0 pass, 2 fail,
   1 error); *log (optional) receives the progress text. */
QHDB_API qhdb_status qhdb_run(const char* subcommand, const char* config_path, const char* out_dir,
                              const qhdb_run_options* options, int* exit_code, char** log);

QHDB_API void qhdb_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif
