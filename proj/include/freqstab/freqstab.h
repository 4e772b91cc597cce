#ifndef FREQSTAB_FREQSTAB_H
#define FREQSTAB_FREQSTAB_H

#include <stddef.h>

#if defined(FREQSTAB_BUILDING_LIBRARY)
#define FST_API __attribute__((visibility("default")))
#else
#define FST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fst_status {
  FST_OK = 0,
  FST_ERR_INVALID_ARGUMENT,
  FST_ERR_DIMENSION_MISMATCH,
  FST_ERR_NON_FINITE,
  FST_ERR_SINGULAR_RESOLVENT,
  FST_ERR_SINGULAR_ADMITTANCE,
  FST_ERR_OPERATING_POINT_MISMATCH,
  FST_ERR_NO_CONVERGENCE,
  FST_ERR_GRID_MISMATCH,
  FST_ERR_POINT_ON_CURVE,
  FST_ERR_MARGINAL_CASE,
  FST_ERR_OPEN_LOOP_UNSTABLE,
  FST_ERR_EIGEN_NO_CONVERGENCE,
  FST_ERR_STEP_TOO_LARGE,
  FST_ERR_NO_DOMINANT_TONE,
  FST_ERR_ILL_CONDITIONED,
  FST_ERR_CONFIG_INVALID,
  FST_ERR_EMPTY_DATASET,
  FST_ERR_IO,
  FST_ERR_INTERNAL
} fst_status;

typedef struct fst_params fst_params;
typedef struct fst_timeseries fst_timeseries;

FST_API const char* fst_version(void);
FST_API const char* fst_status_name(fst_status s);
/* Message of the last failed call on this thread ("" if none). */
FST_API const char* fst_last_error(void);

/* System parameters, initialised to the built-in defaults. */
FST_API fst_status fst_params_create(fst_params** out);
/* Parameters from an INI file or INI text (other sections are validated and ignored). */
FST_API fst_status fst_params_load(const char* path, fst_params** out);
FST_API fst_status fst_params_parse(const char* ini_text, fst_params** out);
FST_API fst_status fst_params_clone(const fst_params* p, fst_params** out);
FST_API void fst_params_destroy(fst_params* p);
/* Dotted paths such as "gfl.alpha_c" or "network.L_line". */
FST_API fst_status fst_params_set(fst_params* p, const char* path, double value);
FST_API fst_status fst_params_get(const fst_params* p, const char* path, double* value);
FST_API size_t fst_param_count(void);
FST_API const char* fst_param_name(size_t index);

typedef struct fst_verdict {
  int stable;
  int marginal;
  int rhp_count;               /* eigenvalue method */
  int encirclements;           /* GNC: clockwise total over both loci */
  double critical_frequency_hz; /* NaN when none */
  double max_real;             /* dominant eigenvalue real part, 1/s */
  double min_distance;         /* GNC: nearest approach to -1 */
} fst_verdict;

FST_API fst_status fst_eigen_verdict(const fst_params* p, fst_verdict* out);
/* extended != 0 includes the frequency coupling term. Non-positive grid
   arguments select the defaults. */
FST_API fst_status fst_gnc_verdict(const fst_params* p, int extended, double f_min, double f_max,
                                   double points_per_decade, fst_verdict* out);

typedef enum fst_response {
  FST_RESPONSE_ZV = 0, /* 2x2, ohm */
  FST_RESPONSE_GV = 1, /* 1x2, (rad/s)/A */
  FST_RESPONSE_YC = 2, /* 2x2, S */
  FST_RESPONSE_PC = 3  /* 2x1, A/(rad/s) */
} fst_response;

/* Row-major complex response at one frequency; re/im need room for 4 values. */
FST_API fst_status fst_frequency_response(const fst_params* p, fst_response which, double f_hz, double* re,
                                          double* im, size_t* rows, size_t* cols);

/* Nonlinear simulation from the operating point; record_dt <= 0 records every step. */
FST_API fst_status fst_simulate(const fst_params* p, double duration, double dt, double record_dt,
                                fst_timeseries** out);
/* Same with a parameter step applied at `at_time`. */
FST_API fst_status fst_simulate_step(const fst_params* p, double duration, double dt, double record_dt,
                                     const char* path, double value, double at_time, fst_timeseries** out);
FST_API void fst_timeseries_destroy(fst_timeseries* ts);
FST_API size_t fst_timeseries_length(const fst_timeseries* ts);
FST_API double fst_timeseries_dt(const fst_timeseries* ts);
FST_API int fst_timeseries_diverged(const fst_timeseries* ts);
FST_API size_t fst_timeseries_channel_count(const fst_timeseries* ts);
FST_API const char* fst_timeseries_channel_name(const fst_timeseries* ts, size_t index);
/* Borrowed pointer, valid until the series is destroyed. */
FST_API fst_status fst_timeseries_channel(const fst_timeseries* ts, const char* name, const double** data,
                                          size_t* length);

FST_API fst_status fst_estimate_oscillation(const double* x, size_t n, double dt, double* frequency_hz,
                                            double* growth_rate);

typedef struct fst_run_options {
  const char* mode;          /* extract | gnc | eigen | equivalence | sweep | simulate | identify */
  const char* config_path;   /* NULL for defaults */
  const char* const* sweeps; /* "path=v1,v2,..." */
  size_t sweep_count;
  const char* out_dir;
  int plots;
  double f_min, f_max, points_per_decade; /* <= 0 keeps the configured value */
} fst_run_options;

/* Returns FST_OK when the run executed; *exit_code is 0 (ok), 1 (config error)
   or 2 (analysis error) and fst_last_record() holds the JSON record. */
FST_API fst_status fst_run(const fst_run_options* opt, int* exit_code);
FST_API const char* fst_last_record(void);

#ifdef __cplusplus
}
#endif

#endif
