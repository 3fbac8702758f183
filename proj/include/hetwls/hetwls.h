/* C interface to libhetwls.
 *
 * Objects are opaque handles created by hetwls_*_create / *_from_* / run
 * functions and released with the matching *_free (NULL is accepted).
 * Every fallible call returns a hetwls_status; on failure the output handle
 * is left untouched and hetwls_last_error() describes the problem for the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with hetwls_string_free. Matrices are row-major.
 */
#ifndef HETWLS_H
#define HETWLS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HETWLS_BUILDING_LIBRARY)
#    define HETWLS_API __declspec(dllexport)
#  else
#    define HETWLS_API __declspec(dllimport)
#  endif
#else
#  define HETWLS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hetwls_status {
  HETWLS_OK = 0,
  HETWLS_E_INVALID_ARGUMENT = 1,
  HETWLS_E_MISSING_COLUMN = 2,
  HETWLS_E_PARSE = 3,
  HETWLS_E_IO = 4,
  HETWLS_E_SINGULAR_DESIGN = 5,
  HETWLS_E_SINGULAR_COVARIANCE = 6,
  HETWLS_E_INVALID_GAMMA = 7,
  HETWLS_E_INVALID_MOMENTS = 8,
  HETWLS_E_EMPTY_GROUP = 9,
  HETWLS_E_DEGENERATE_GROUP_VARIANCE = 10,
  HETWLS_E_QUADRATURE_FAILURE = 11,
  HETWLS_E_ALL_FREQUENCIES_SINGULAR = 12,
  HETWLS_E_INVALID_TARGET = 13,
  HETWLS_E_OUT_OF_MEMORY = 14,
  HETWLS_E_INTERNAL = 15
} hetwls_status;

HETWLS_API const char* hetwls_version(void);
HETWLS_API const char* hetwls_status_name(hetwls_status status);
/* Message of the last failed call on this thread; "" if none. */
HETWLS_API const char* hetwls_last_error(void);
HETWLS_API void hetwls_string_free(char* s);

/* ---- regression data ------------------------------------------------- */

typedef struct hetwls_data hetwls_data;

/* X is n x p row-major. sigma and groups may be NULL; group labels are
 * 1..M with every group nonempty. */
HETWLS_API hetwls_status hetwls_data_create(const double* X, const double* y, size_t n, size_t p,
                                            const double* sigma, const int* groups,
                                            hetwls_data** out);
/* CSV with header y[,sigma][,group],x1..xp. */
HETWLS_API hetwls_status hetwls_data_from_csv(const char* text, hetwls_data** out);
HETWLS_API hetwls_status hetwls_data_read_csv(const char* path, hetwls_data** out);
HETWLS_API size_t hetwls_data_n(const hetwls_data* data);
HETWLS_API size_t hetwls_data_p(const hetwls_data* data);
HETWLS_API int hetwls_data_has_sigma(const hetwls_data* data);
HETWLS_API void hetwls_data_free(hetwls_data* data);

/* ---- fitting ----------------------------------------------------------- */

typedef struct hetwls_fit hetwls_fit;

/* strategy: "ols", "wls", "adaptive_known", "adaptive_grouped", "fixed_delta".
 * iterations: adaptive rounds, 0 for the default (2).
 * delta: used by fixed_delta only.
 * gamma: "trace" or "x<j>"; NULL means trace.
 * variance: "sandwich", "plug_in" or "none"; NULL means sandwich. */
HETWLS_API hetwls_status hetwls_fit_run(const hetwls_data* data, const char* strategy,
                                        int iterations, double delta, const char* gamma,
                                        const char* variance, hetwls_fit** out);
/* Parses a fit job (JSON), reads its dataset and fits it. Relative paths are
 * resolved against base_dir (may be NULL). */
HETWLS_API hetwls_status hetwls_fit_job_run(const char* json, const char* base_dir,
                                            hetwls_fit** out);
HETWLS_API size_t hetwls_fit_p(const hetwls_fit* fit);
HETWLS_API size_t hetwls_fit_n(const hetwls_fit* fit);
/* Copies p coefficients. */
HETWLS_API hetwls_status hetwls_fit_beta(const hetwls_fit* fit, double* out, size_t len);
/* Copies n weights. */
HETWLS_API hetwls_status hetwls_fit_weights(const hetwls_fit* fit, double* out, size_t len);
/* Returns 1 and sets *delta when the strategy produced one. */
HETWLS_API int hetwls_fit_delta(const hetwls_fit* fit, double* delta);
/* Returns 1 and copies the p x p covariance estimate when one was requested. */
HETWLS_API int hetwls_fit_covariance(const hetwls_fit* fit, double* out, size_t len);
/* "quantity,index,value" rows: beta (1..p), delta, weight (1..n). */
HETWLS_API hetwls_status hetwls_fit_csv(const hetwls_fit* fit, char** out);
/* Header x1..xp, one row per coefficient. */
HETWLS_API hetwls_status hetwls_fit_covariance_csv(const hetwls_fit* fit, char** out);
HETWLS_API void hetwls_fit_free(hetwls_fit* fit);

/* ---- Monte Carlo ------------------------------------------------------- */

typedef struct hetwls_sim_config hetwls_sim_config;
typedef struct hetwls_sim_report hetwls_sim_report;

HETWLS_API hetwls_status hetwls_sim_config_from_json(const char* json, hetwls_sim_config** out);
HETWLS_API void hetwls_sim_config_set_seed(hetwls_sim_config* config, uint64_t seed);
/* 0 = hardware concurrency. */
HETWLS_API void hetwls_sim_config_set_threads(hetwls_sim_config* config, unsigned threads);
HETWLS_API void hetwls_sim_config_free(hetwls_sim_config* config);

HETWLS_API hetwls_status hetwls_simulate(const hetwls_sim_config* config,
                                         hetwls_sim_report** out);
HETWLS_API size_t hetwls_sim_strategy_count(const hetwls_sim_report* report);
HETWLS_API const char* hetwls_sim_strategy_name(const hetwls_sim_report* report, size_t i);
HETWLS_API size_t hetwls_sim_estimator_count(const hetwls_sim_report* report);
HETWLS_API const char* hetwls_sim_estimator_name(const hetwls_sim_report* report, size_t j);
/* Returns 1 and sets *coverage, or 0 when the estimator does not apply. */
HETWLS_API int hetwls_sim_coverage(const hetwls_sim_report* report, size_t strategy, size_t estimator,
                                   double* coverage);
HETWLS_API size_t hetwls_sim_failures(const hetwls_sim_report* report, size_t strategy);
HETWLS_API hetwls_status hetwls_sim_replicates_csv(const hetwls_sim_report* report, char** out);
HETWLS_API hetwls_status hetwls_sim_summary_csv(const hetwls_sim_report* report, char** out);
HETWLS_API hetwls_status hetwls_sim_ellipse_csv(const hetwls_sim_report* report, char** out);
HETWLS_API void hetwls_sim_report_free(hetwls_sim_report* report);

/* ---- light curves and periodograms ------------------------------------ */

typedef struct hetwls_lightcurve hetwls_lightcurve;
typedef struct hetwls_periodogram hetwls_periodogram;
typedef struct hetwls_periodogram_job hetwls_periodogram_job;

HETWLS_API hetwls_status hetwls_lightcurve_create(const double* t, const double* mag,
                                                  const double* err, size_t n,
                                                  hetwls_lightcurve** out);
/* CSV with header t,mag,err. */
HETWLS_API hetwls_status hetwls_lightcurve_from_csv(const char* text, hetwls_lightcurve** out);
HETWLS_API hetwls_status hetwls_lightcurve_read_csv(const char* path, hetwls_lightcurve** out);
HETWLS_API size_t hetwls_lightcurve_size(const hetwls_lightcurve* lc);
HETWLS_API void hetwls_lightcurve_free(hetwls_lightcurve* lc);

/* weighting: "identity", "inverse_variance" or "delta". omega is a strictly
 * increasing grid in rad/day. gamma may be NULL (trace). */
HETWLS_API hetwls_status hetwls_periodogram_run(const hetwls_lightcurve* lc, int K,
                                                const char* weighting, const double* omega,
                                                size_t grid_len, const char* gamma,
                                                hetwls_periodogram** out);
HETWLS_API double hetwls_periodogram_omega(const hetwls_periodogram* pg);
HETWLS_API double hetwls_periodogram_period(const hetwls_periodogram* pg);
HETWLS_API size_t hetwls_periodogram_harmonics(const hetwls_periodogram* pg);
/* Copies 2K+1 coefficients (b0, b11, b12, ..., bK1, bK2). */
HETWLS_API hetwls_status hetwls_periodogram_beta(const hetwls_periodogram* pg, double* out, size_t len);
/* Copies K amplitudes and K phases. */
HETWLS_API hetwls_status hetwls_periodogram_amplitudes(const hetwls_periodogram* pg, double* amplitudes,
                                                       double* phases, size_t len);
HETWLS_API int hetwls_periodogram_delta(const hetwls_periodogram* pg, double* delta);
HETWLS_API size_t hetwls_periodogram_singular_count(const hetwls_periodogram* pg);
/* "omega,rss" rows. */
HETWLS_API hetwls_status hetwls_periodogram_csv(const hetwls_periodogram* pg, char** out);
HETWLS_API void hetwls_periodogram_free(hetwls_periodogram* pg);

HETWLS_API hetwls_status hetwls_periodogram_job_from_json(const char* json, const char* base_dir,
                                                          hetwls_periodogram_job** out);
HETWLS_API size_t hetwls_periodogram_job_curve_count(const hetwls_periodogram_job* job);
HETWLS_API const char* hetwls_periodogram_job_curve_path(const hetwls_periodogram_job* job, size_t i);
/* Reads curve i and runs the job's periodogram on the job's grid. */
HETWLS_API hetwls_status hetwls_periodogram_job_run(const hetwls_periodogram_job* job, size_t i,
                                                    hetwls_periodogram** out);
HETWLS_API void hetwls_periodogram_job_free(hetwls_periodogram_job* job);

/* ---- period-recovery study -------------------------------------------- */

typedef struct hetwls_score_job hetwls_score_job;
typedef struct hetwls_study hetwls_study;

HETWLS_API hetwls_status hetwls_score_job_from_json(const char* json, const char* base_dir,
                                                    hetwls_score_job** out);
HETWLS_API void hetwls_score_job_set_seed(hetwls_score_job* job, uint64_t seed);
HETWLS_API void hetwls_score_job_set_threads(hetwls_score_job* job, unsigned threads);
HETWLS_API void hetwls_score_job_free(hetwls_score_job* job);

/* Builds or loads the catalog and runs the sweep. Manifest curves that fail to
 * load are skipped and listed through hetwls_study_skipped_*. */
HETWLS_API hetwls_status hetwls_score_run(const hetwls_score_job* job, hetwls_study** out);
HETWLS_API size_t hetwls_study_catalog_size(const hetwls_study* study);
HETWLS_API size_t hetwls_study_skipped_count(const hetwls_study* study);
HETWLS_API const char* hetwls_study_skipped_message(const hetwls_study* study, size_t i);
HETWLS_API size_t hetwls_study_cell_count(const hetwls_study* study);
/* Any output pointer may be NULL. *weighting points into the study. */
HETWLS_API hetwls_status hetwls_study_cell(const hetwls_study* study, size_t i, int* n, int* K,
                                           const char** weighting, double* fraction,
                                           size_t* count, size_t* failures);
/* Rows n, columns K<k>_<weighting>. Header only for an empty catalog. */
HETWLS_API hetwls_status hetwls_study_csv(const hetwls_study* study, char** out);
HETWLS_API void hetwls_study_free(hetwls_study* study);

#ifdef __cplusplus
}
#endif

#endif /* HETWLS_H */
