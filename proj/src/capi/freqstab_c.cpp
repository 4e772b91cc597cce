#include "freqstab/freqstab.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "error.hpp"
#include "extraction.hpp"
#include "params.hpp"
#include "runner.hpp"
#include "stability.hpp"
#include "timedomain.hpp"

struct fst_params {
  freqstab::SystemParams p;
};

struct fst_timeseries {
  freqstab::TimeSeries ts;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_record;

static_assert(FST_ERR_INVALID_ARGUMENT == static_cast<int>(freqstab::ErrorCode::kInvalidArgument) + 1);
static_assert(FST_ERR_IO == static_cast<int>(freqstab::ErrorCode::kIo) + 1);

fst_status status_of(freqstab::ErrorCode c) { return static_cast<fst_status>(static_cast<int>(c) + 1); }

template <class F>
fst_status guard(F&& f) {
  try {
    f();
    g_error.clear();
    return FST_OK;
  } catch (const freqstab::Error& e) {
    g_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return FST_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return FST_ERR_INTERNAL;
  }
}

fst_status null_arg(const char* what) {
  g_error = std::string("null argument: ") + what;
  return FST_ERR_INVALID_ARGUMENT;
}

fst_verdict to_c(const freqstab::StabilityVerdict& v) {
  fst_verdict o{};
  o.stable = v.stable ? 1 : 0;
  o.marginal = v.marginal ? 1 : 0;
  o.rhp_count = v.rhp_count;
  for (int e : v.encirclements) o.encirclements += e;
  o.critical_frequency_hz = v.critical_frequency_hz.value_or(std::numeric_limits<double>::quiet_NaN());
  o.max_real = v.max_real;
  o.min_distance = v.min_distance;
  return o;
}

freqstab::TimeSeries run_sim(const fst_params* p, double duration, double dt, double record_dt,
                             std::optional<freqstab::ParameterOverride> change) {
  freqstab::Scenario sc;
  sc.params = p->p;
  sc.duration = duration;
  sc.dt = dt;
  sc.record_dt = record_dt > 0.0 ? record_dt : dt;
  sc.change = std::move(change);
  return freqstab::simulate(sc);
}

}  // namespace

extern "C" {

const char* fst_version(void) { return "0.1.0"; }

const char* fst_status_name(fst_status s) {
  static thread_local std::string name;
  if (s == FST_OK) return "ok";
  if (s == FST_ERR_INTERNAL) return "internal";
  if (s < FST_OK || s > FST_ERR_INTERNAL) return "unknown";
  name = std::string(freqstab::to_string(static_cast<freqstab::ErrorCode>(static_cast<int>(s) - 1)));
  return name.c_str();
}

const char* fst_last_error(void) { return g_error.c_str(); }
const char* fst_last_record(void) { return g_record.c_str(); }

fst_status fst_params_create(fst_params** out) {
  if (!out) return null_arg("out");
  return guard([&] { *out = new fst_params{}; });
}

fst_status fst_params_parse(const char* text, fst_params** out) {
  if (!text) return null_arg("ini_text");
  if (!out) return null_arg("out");
  return guard([&] { *out = new fst_params{freqstab::parse_config(text).system}; });
}

fst_status fst_params_load(const char* path, fst_params** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guard([&] { *out = new fst_params{freqstab::load_config(path).system}; });
}

fst_status fst_params_clone(const fst_params* p, fst_params** out) {
  if (!p) return null_arg("params");
  if (!out) return null_arg("out");
  return guard([&] { *out = new fst_params{*p}; });
}

void fst_params_destroy(fst_params* p) { delete p; }

fst_status fst_params_set(fst_params* p, const char* path, double value) {
  if (!p) return null_arg("params");
  if (!path) return null_arg("path");
  return guard([&] { freqstab::set_param(p->p, path, value); });
}

fst_status fst_params_get(const fst_params* p, const char* path, double* value) {
  if (!p) return null_arg("params");
  if (!path) return null_arg("path");
  if (!value) return null_arg("value");
  return guard([&] { *value = freqstab::get_param(p->p, path); });
}

size_t fst_param_count(void) { return freqstab::parameter_paths().size(); }

const char* fst_param_name(size_t index) {
  static const std::vector<std::string> names = freqstab::parameter_paths();
  return index < names.size() ? names[index].c_str() : nullptr;
}

fst_status fst_eigen_verdict(const fst_params* p, fst_verdict* out) {
  if (!p) return null_arg("params");
  if (!out) return null_arg("out");
  return guard([&] {
    const auto op = freqstab::solve_operating_point(p->p);
    const auto sys = freqstab::build_system_model(p->p, op);
    *out = to_c(freqstab::eigen_verdict(sys.A).verdict);
  });
}

fst_status fst_gnc_verdict(const fst_params* p, int extended, double f_min, double f_max, double ppd,
                           fst_verdict* out) {
  if (!p) return null_arg("params");
  if (!out) return null_arg("out");
  return guard([&] {
    freqstab::AnalysisOptions opt;
    if (f_min > 0.0) opt.grid.f_min = f_min;
    if (f_max > 0.0) opt.grid.f_max = f_max;
    if (ppd > 0.0) opt.grid.points_per_decade = ppd;
    const auto a = freqstab::analyze_configuration(p->p, opt);
    *out = to_c(extended ? a.gnc_ext : a.gnc_std);
  });
}

fst_status fst_frequency_response(const fst_params* p, fst_response which, double f_hz, double* re, double* im,
                                  size_t* rows, size_t* cols) {
  if (!p) return null_arg("params");
  if (!re || !im) return null_arg("re/im");
  return guard([&] {
    const auto op = freqstab::solve_operating_point(p->p);
    const std::vector<double> f{f_hz};
    freqstab::TransferSamples s;
    switch (which) {
      case FST_RESPONSE_ZV:
        s = freqstab::vsm_impedance(freqstab::build_gfm_model(p->p, op), f);
        break;
      case FST_RESPONSE_GV:
        s = freqstab::vsm_frequency_impedance(freqstab::build_gfm_model(p->p, op),
                                              freqstab::GammaMethod::kExactInversion,
                                              freqstab::kDefaultVirtualResistor, f);
        break;
      case FST_RESPONSE_YC:
        s = freqstab::csm_admittance(freqstab::build_gfl_model(p->p, op), f);
        break;
      case FST_RESPONSE_PC:
        s = freqstab::csm_frequency_admittance(freqstab::build_gfl_model(p->p, op), f);
        break;
      default:
        throw freqstab::Error(freqstab::ErrorCode::kInvalidArgument, "unknown response kind");
    }
    const auto& v = s.values.at(0);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        re[r * v.cols() + c] = v(r, c).real();
        im[r * v.cols() + c] = v(r, c).imag();
      }
    }
    if (rows) *rows = static_cast<size_t>(v.rows());
    if (cols) *cols = static_cast<size_t>(v.cols());
  });
}

fst_status fst_simulate(const fst_params* p, double duration, double dt, double record_dt, fst_timeseries** out) {
  if (!p) return null_arg("params");
  if (!out) return null_arg("out");
  return guard([&] { *out = new fst_timeseries{run_sim(p, duration, dt, record_dt, std::nullopt)}; });
}

fst_status fst_simulate_step(const fst_params* p, double duration, double dt, double record_dt, const char* path,
                             double value, double at_time, fst_timeseries** out) {
  if (!p) return null_arg("params");
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guard([&] {
    *out = new fst_timeseries{run_sim(p, duration, dt, record_dt, freqstab::ParameterOverride{path, value, at_time})};
  });
}

void fst_timeseries_destroy(fst_timeseries* ts) { delete ts; }
size_t fst_timeseries_length(const fst_timeseries* ts) { return ts ? ts->ts.size() : 0; }
double fst_timeseries_dt(const fst_timeseries* ts) { return ts ? ts->ts.dt : 0.0; }
int fst_timeseries_diverged(const fst_timeseries* ts) { return ts && ts->ts.diverged ? 1 : 0; }
size_t fst_timeseries_channel_count(const fst_timeseries* ts) { return ts ? ts->ts.names.size() : 0; }

const char* fst_timeseries_channel_name(const fst_timeseries* ts, size_t index) {
  if (!ts || index >= ts->ts.names.size()) return nullptr;
  return ts->ts.names[index].c_str();
}

fst_status fst_timeseries_channel(const fst_timeseries* ts, const char* name, const double** data, size_t* length) {
  if (!ts) return null_arg("timeseries");
  if (!name) return null_arg("name");
  if (!data) return null_arg("data");
  return guard([&] {
    const auto& ch = ts->ts.channel(name);
    *data = ch.data();
    if (length) *length = ch.size();
  });
}

fst_status fst_estimate_oscillation(const double* x, size_t n, double dt, double* frequency_hz, double* growth_rate) {
  if (!x && n > 0) return null_arg("x");
  return guard([&] {
    const auto o = freqstab::estimate_oscillation(std::vector<double>(x, x + n), dt);
    if (frequency_hz) *frequency_hz = o.frequency_hz;
    if (growth_rate) *growth_rate = o.growth_rate;
  });
}

fst_status fst_run(const fst_run_options* opt, int* exit_code) {
  if (!opt) return null_arg("options");
  if (!opt->mode) return null_arg("mode");
  if (!exit_code) return null_arg("exit_code");
  if (opt->sweep_count > 0 && !opt->sweeps) return null_arg("sweeps");
  return guard([&] {
    freqstab::RunConfig rc;
    rc.mode = opt->mode;
    if (opt->config_path) rc.config_path = opt->config_path;
    for (size_t k = 0; k < opt->sweep_count; ++k) {
      if (!opt->sweeps[k]) throw freqstab::Error(freqstab::ErrorCode::kInvalidArgument, "null sweep entry");
      rc.sweeps.emplace_back(opt->sweeps[k]);
    }
    if (opt->out_dir) rc.out_dir = opt->out_dir;
    rc.plots = opt->plots != 0;
    if (opt->f_min > 0.0) rc.f_min = opt->f_min;
    if (opt->f_max > 0.0) rc.f_max = opt->f_max;
    if (opt->points_per_decade > 0.0) rc.points_per_decade = opt->points_per_decade;
    const auto res = freqstab::run(rc);
    g_record = res.record.dump(2);
    *exit_code = res.exit_code;
  });
}

}  // extern "C"
