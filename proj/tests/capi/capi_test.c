/* Exercises the C interface from plain C. */
#include <freqstab/freqstab.h>

#include <math.h>
#include <stdio.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void test_params(void) {
  fst_params* p = NULL;
  fst_params* q = NULL;
  double v = 0.0;
  EXPECT(fst_params_create(&p) == FST_OK);
  EXPECT(fst_param_count() > 10);
  EXPECT(fst_param_name(0) != NULL);
  EXPECT(fst_param_name(fst_param_count()) == NULL);
  EXPECT(fst_params_get(p, "gfl.alpha_c", &v) == FST_OK && v == 100.0);
  EXPECT(fst_params_set(p, "gfl.alpha_c", 80.0) == FST_OK);
  EXPECT(fst_params_clone(p, &q) == FST_OK);
  EXPECT(fst_params_get(q, "gfl.alpha_c", &v) == FST_OK && v == 80.0);
  EXPECT(fst_params_set(p, "gfl.nope", 1.0) == FST_ERR_CONFIG_INVALID);
  EXPECT(strlen(fst_last_error()) > 0);
  EXPECT(fst_params_get(NULL, "gfl.alpha_c", &v) == FST_ERR_INVALID_ARGUMENT);
  fst_params_destroy(q);
  q = NULL;
  EXPECT(fst_params_parse("[gfl]\nalpha_c = 70\n", &q) == FST_OK);
  EXPECT(fst_params_get(q, "gfl.alpha_c", &v) == FST_OK && v == 70.0);
  fst_params_destroy(q);
  q = NULL;
  EXPECT(fst_params_parse("[gfl]\nalpha_c = x\n", &q) == FST_ERR_CONFIG_INVALID);
  EXPECT(q == NULL);
  fst_params_destroy(p);
  fst_params_destroy(NULL);
}

static void test_verdicts(void) {
  fst_params* p = NULL;
  fst_verdict e, g;
  fst_params_create(&p);
  EXPECT(fst_eigen_verdict(p, &e) == FST_OK);
  EXPECT(e.stable == 1 && e.rhp_count == 0);
  EXPECT(fst_gnc_verdict(p, 1, 0.0, 0.0, 0.0, &g) == FST_OK);
  EXPECT(g.stable == 1 && g.encirclements == 0);

  fst_params_set(p, "gfl.alpha_c", 70.0);
  EXPECT(fst_eigen_verdict(p, &e) == FST_OK);
  EXPECT(fst_gnc_verdict(p, 1, 0.0, 0.0, 0.0, &g) == FST_OK);
  EXPECT(e.stable == 0 && e.rhp_count == 2 && e.max_real > 0.0);
  EXPECT(g.stable == 0 && g.encirclements > 0);
  EXPECT(!isnan(g.critical_frequency_hz) && !isnan(e.critical_frequency_hz));
  EXPECT(fabs(g.critical_frequency_hz / e.critical_frequency_hz - 1.0) < 0.05);
  EXPECT(fst_gnc_verdict(p, 1, 10.0, 1.0, 50.0, &g) != FST_OK);
  fst_params_destroy(p);
}

static void test_response(void) {
  fst_params* p = NULL;
  double re[4], im[4];
  size_t rows = 0, cols = 0;
  fst_params_create(&p);
  EXPECT(fst_frequency_response(p, FST_RESPONSE_GV, 1.0, re, im, &rows, &cols) == FST_OK);
  EXPECT(rows == 1 && cols == 2);
  EXPECT(fst_frequency_response(p, FST_RESPONSE_PC, 1.0, re, im, &rows, &cols) == FST_OK);
  EXPECT(rows == 2 && cols == 1);
  EXPECT(fst_frequency_response(p, FST_RESPONSE_YC, 1e4, re, im, &rows, &cols) == FST_OK);
  EXPECT(rows == 2 && cols == 2);
  /* diagonal conductance small at high frequency, off-diagonal dominated by the filter */
  EXPECT(sqrt(re[0] * re[0] + im[0] * im[0]) < 0.05);
  EXPECT(fst_frequency_response(p, (fst_response)9, 1.0, re, im, &rows, &cols) == FST_ERR_INVALID_ARGUMENT);
  EXPECT(fst_frequency_response(p, FST_RESPONSE_ZV, -1.0, re, im, &rows, &cols) != FST_OK);
  fst_params_destroy(p);
}

static void test_simulation(void) {
  fst_params* p = NULL;
  fst_timeseries* ts = NULL;
  const double* w = NULL;
  size_t n = 0, k;
  double f = 0.0, s = 0.0;
  double x[2000];
  fst_params_create(&p);
  EXPECT(fst_simulate(p, 0.5, 50e-6, 1e-3, &ts) == FST_OK);
  EXPECT(fst_timeseries_length(ts) == 501);
  EXPECT(fabs(fst_timeseries_dt(ts) - 1e-3) < 1e-12);
  EXPECT(fst_timeseries_diverged(ts) == 0);
  EXPECT(fst_timeseries_channel_count(ts) >= 7);
  EXPECT(fst_timeseries_channel(ts, "omega_v", &w, &n) == FST_OK && n == 501);
  EXPECT(fabs(w[n - 1] - w[0]) < 1e-6 * w[0]);
  EXPECT(fst_timeseries_channel(ts, "nope", &w, &n) != FST_OK);
  fst_timeseries_destroy(ts);
  ts = NULL;
  EXPECT(fst_simulate(p, 1.0, 1e-2, 0.0, &ts) == FST_ERR_STEP_TOO_LARGE);
  EXPECT(ts == NULL);
  EXPECT(fst_simulate_step(p, 0.5, 50e-6, 1e-3, "gfl.P_set", 6000.0, 0.1, &ts) == FST_OK);
  fst_timeseries_destroy(ts);

  for (k = 0; k < 2000; ++k) {
    const double t = k * 0.01;
    x[k] = exp(-0.3 * t) * sin(2.0 * 3.14159265358979323846 * 1.25 * t);
  }
  EXPECT(fst_estimate_oscillation(x, 2000, 0.01, &f, &s) == FST_OK);
  EXPECT(fabs(f - 1.25) < 0.0125);
  EXPECT(fabs(s + 0.3) < 0.03);
  for (k = 0; k < 2000; ++k) x[k] = 1.0;
  EXPECT(fst_estimate_oscillation(x, 2000, 0.01, &f, &s) == FST_ERR_NO_DOMINANT_TONE);
  fst_params_destroy(p);
}

static void test_run(void) {
  const char* sweeps[] = {"gfl.alpha_c=100,70"};
  fst_run_options o;
  int code = -1;
  memset(&o, 0, sizeof o);
  o.mode = "equivalence";
  o.sweeps = sweeps;
  o.sweep_count = 1;
  o.out_dir = "capi_run_out";
  o.plots = 0;
  o.points_per_decade = 40.0;
  EXPECT(fst_run(&o, &code) == FST_OK);
  EXPECT(code == 0);
  EXPECT(strstr(fst_last_record(), "\"status\": \"ok\"") != NULL);
  o.sweep_count = 0;
  EXPECT(fst_run(&o, &code) == FST_OK);
  EXPECT(code == 1);
  EXPECT(strstr(fst_last_record(), "config-invalid") != NULL);
  o.mode = "bogus";
  EXPECT(fst_run(&o, &code) == FST_OK && code == 1);
  EXPECT(fst_run(NULL, &code) == FST_ERR_INVALID_ARGUMENT);
}

int main(void) {
  EXPECT(fst_version() != NULL && strlen(fst_version()) > 0);
  EXPECT(strcmp(fst_status_name(FST_OK), "ok") == 0);
  EXPECT(strcmp(fst_status_name(FST_ERR_STEP_TOO_LARGE), "step-too-large") == 0);
  test_params();
  test_verdicts();
  test_response();
  test_simulation();
  test_run();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
