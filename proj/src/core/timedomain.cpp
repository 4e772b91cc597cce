#include "timedomain.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>

#include "error.hpp"
#include "state_space.hpp"

namespace freqstab {

const std::vector<std::string>& simulation_channels() {
  static const std::vector<std::string> c = {"u_d", "u_q", "i_d", "i_q", "omega_v", "p", "q", "dev_pu"};
  return c;
}

namespace {

double max_abs_eigenvalue(const SystemParams& p, const OperatingPoint& op) {
  const auto ev = eigenvalues(system_jacobian(p, op.x));
  double m = 0.0;
  for (const auto& l : ev) m = std::max(m, std::abs(l));
  return m;
}

void check_step(const SystemParams& p, const OperatingPoint& op, double dt) {
  const double lam = max_abs_eigenvalue(p, op);
  if (dt * lam > kMaxStepEigenProduct) {
    throw Error(ErrorCode::kStepTooLarge, "integrator step " + std::to_string(dt) + " s is too large for the fastest mode (" +
                                              std::to_string(lam) + " 1/s)");
  }
}

// FFTW planning is not thread-safe
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

TimeSeries simulate(const Scenario& sc) { return simulate(sc, nullptr); }

TimeSeries simulate(const Scenario& sc, Eigen::VectorXd* final_state) {
  sc.params.validate();
  const double T0 = 1.0 / sc.params.nominal.f;
  if (!(sc.dt > 0.0)) throw Error(ErrorCode::kConfigInvalid, "integrator step must be > 0");
  if (!(sc.duration >= 10.0 * T0 - 1e-12)) {
    throw Error(ErrorCode::kConfigInvalid, "duration must cover at least 10 fundamental periods");
  }
  if (sc.change && !(sc.change->time >= 0.0 && sc.change->time <= sc.duration)) {
    throw Error(ErrorCode::kConfigInvalid, "override time outside the simulated interval");
  }
  std::vector<int> idx;
  if (sc.channels.empty()) {
    for (int k = 0; k < 8; ++k) idx.push_back(k);
  } else {
    const auto& all = simulation_channels();
    for (const auto& c : sc.channels) {
      auto it = std::find(all.begin(), all.end(), c);
      if (it == all.end()) throw Error(ErrorCode::kConfigInvalid, "unknown channel '" + c + "'");
      idx.push_back(static_cast<int>(it - all.begin()));
    }
  }

  SystemParams p = sc.params;
  const OperatingPoint op = solve_operating_point(p);
  check_step(p, op, sc.dt);
  SystemParams p_after = p;
  if (sc.change) {
    set_param(p_after, sc.change->path, sc.change->value);
    p_after.validate();
    // the post-change system may not have an equilibrium; only its Jacobian at
    // the pre-change point bounds the step
    const double lam = [&] {
      const auto ev = eigenvalues(system_jacobian(p_after, op.x));
      double m = 0.0;
      for (const auto& l : ev) m = std::max(m, std::abs(l));
      return m;
    }();
    if (sc.dt * lam > kMaxStepEigenProduct) {
      throw Error(ErrorCode::kStepTooLarge, "integrator step too large after the parameter change");
    }
  }

  Eigen::VectorXd x = sc.initial_state ? *sc.initial_state : op.x;
  if (x.size() != kSysStates) throw Error(ErrorCode::kDimensionMismatch, "initial state length");
  const Eigen::VectorXd scale = system_state_scale(p);
  const Eigen::VectorXd limit = 1e3 * scale;

  const auto steps = static_cast<long>(std::llround(sc.duration / sc.dt));
  const long decim = std::max<long>(1, std::lround(sc.record_dt / sc.dt));
  TimeSeries ts;
  ts.t0 = 0.0;
  ts.dt = sc.dt * static_cast<double>(decim);
  const auto& names = simulation_channels();
  for (int k : idx) ts.add_channel(names[static_cast<std::size_t>(k)]);
  for (auto& ch : ts.channels) ch.reserve(static_cast<std::size_t>(steps / decim + 1));

  const SystemParams* cur = &p;
  GflGains gains = gfl_gains(p);
  auto f = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd dz(kSysStates);
    system_eval<double>(*cur, gains, z.data(), 0.0, 0.0, dz.data());
    return dz;
  };
  auto record = [&](const Eigen::VectorXd& z) {
    double u[2], w, i[2];
    Eigen::VectorXd dz(kSysStates);
    system_eval<double>(*cur, gains, z.data(), 0.0, 0.0, dz.data(), u, &w, i);
    const double dev = (z - op.x).cwiseQuotient(scale).norm();
    const double v[8] = {u[0], u[1], i[0], i[1], w, 1.5 * (u[0] * i[0] + u[1] * i[1]),
                         1.5 * (u[1] * i[0] - u[0] * i[1]), dev};
    for (std::size_t c = 0; c < idx.size(); ++c) ts.channels[c].push_back(v[idx[c]]);
  };

  const long change_step = sc.change ? std::lround(sc.change->time / sc.dt) : -1;
  record(x);
  for (long n = 0; n < steps; ++n) {
    if (n == change_step) {
      cur = &p_after;
      gains = gfl_gains(p_after);
    }
    rk4_step(f, x, sc.dt);
    bool bad = !x.allFinite();
    if (!bad) {
      for (int k = 0; k < kSysStates; ++k) {
        if (std::abs(x[k]) > limit[k]) {
          bad = true;
          break;
        }
      }
    }
    if (bad) {
      ts.diverged = true;
      ts.divergence_time = static_cast<double>(n + 1) * sc.dt;
      break;
    }
    if ((n + 1) % decim == 0) record(x);
  }
  if (final_state) *final_state = x;
  return ts;
}

double deviation_growth_rate(const TimeSeries& ts, double t_start, double t_end) {
  const auto& d = ts.channel("dev_pu");
  double s0 = 0, s1 = 0, s2 = 0, sy = 0, sty = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double t = ts.time(k);
    if (t < t_start || t > t_end || !(d[k] > 0.0)) continue;
    const double y = std::log(d[k]);
    s0 += 1;
    s1 += t;
    s2 += t * t;
    sy += y;
    sty += t * y;
  }
  if (s0 < 3) throw Error(ErrorCode::kEmptyDataset, "no samples in the growth window");
  return (s0 * sty - s1 * sy) / (s0 * s2 - s1 * s1);
}

TimeDomainCheck time_domain_check(const SystemParams& p, double window, double settle, double dt, double kick_pu) {
  Scenario sc;
  sc.params = p;
  sc.duration = settle + window;
  sc.dt = dt;
  const OperatingPoint op = solve_operating_point(p);
  sc.initial_state = op.x + kick_pu * system_state_scale(p);
  const TimeSeries ts = simulate(sc);
  TimeDomainCheck out;
  out.diverged = ts.diverged;
  if (ts.diverged) {
    out.growth_rate = std::numeric_limits<double>::infinity();
    return out;
  }
  out.growth_rate = deviation_growth_rate(ts, settle, settle + window);
  try {
    out.tone = estimate_oscillation(ts, "i_d", window);
  } catch (const Error& e) {
    out.tone_error = e.what();
  }
  return out;
}

Oscillation estimate_oscillation(const TimeSeries& ts, const std::string& channel, double window) {
  const auto& ch = ts.channel(channel);
  if (!(window > 0.0) || !(ts.dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "window must be > 0");
  const auto n = static_cast<std::size_t>(std::min<double>(static_cast<double>(ch.size()), std::floor(window / ts.dt)));
  if (n < 16) throw Error(ErrorCode::kEmptyDataset, "window holds too few samples");
  std::vector<double> seg(ch.end() - static_cast<std::ptrdiff_t>(n), ch.end());
  return estimate_oscillation(seg, ts.dt);
}

Oscillation estimate_oscillation(const std::vector<double>& x_in, double dt) {
  const std::size_t n = x_in.size();
  if (n < 16) throw Error(ErrorCode::kEmptyDataset, "too few samples");
  for (double v : x_in) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite sample");
  }
  // linear detrend
  std::vector<double> t(n), x(n);
  double st = 0, sx = 0, stt = 0, stx = 0, mean_abs = 0;
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = static_cast<double>(k) * dt;
    st += t[k];
    sx += x_in[k];
    stt += t[k] * t[k];
    stx += t[k] * x_in[k];
    mean_abs += std::abs(x_in[k]);
  }
  const double dn = static_cast<double>(n);
  const double slope = (dn * stx - st * sx) / (dn * stt - st * st);
  const double icpt = (sx - slope * st) / dn;
  double rms = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = x_in[k] - (icpt + slope * t[k]);
    rms += x[k] * x[k];
  }
  rms = std::sqrt(rms / dn);
  mean_abs /= dn;
  if (!(rms > 1e-10 * std::max(mean_abs, 1e-300))) {
    throw Error(ErrorCode::kNoDominantTone, "channel carries no oscillation");
  }

  // Hann-windowed, zero-padded spectrum
  std::size_t m = 1;
  while (m < 8 * n) m <<= 1;
  std::vector<double> buf(m, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    buf[k] = x[k] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / (dn - 1.0)));
  }
  std::vector<std::complex<double>> spec(m / 2 + 1);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), buf.data(),
                                          reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }
  const double df = 1.0 / (static_cast<double>(m) * dt);
  const double span = dn * dt;
  // at least 1.5 cycles inside the window
  const auto k_min = static_cast<std::size_t>(std::ceil(1.5 / span / df));
  std::vector<double> mag(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]);
  if (k_min + 2 >= mag.size()) throw Error(ErrorCode::kNoDominantTone, "window too short");
  std::size_t kp = k_min;
  for (std::size_t k = k_min; k + 1 < mag.size(); ++k) {
    if (mag[k] > mag[kp]) kp = k;
  }
  std::vector<double> rest(mag.begin() + static_cast<std::ptrdiff_t>(k_min), mag.end());
  std::nth_element(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 2), rest.end());
  const double median = rest[rest.size() / 2];
  Oscillation out;
  out.peak_over_median_db = 20.0 * std::log10(mag[kp] / std::max(median, 1e-300));
  if (!(out.peak_over_median_db >= 6.0) || kp == k_min) {
    throw Error(ErrorCode::kNoDominantTone, "no spectral peak 6 dB above the median");
  }
  const double a = std::log(mag[kp - 1]), b = std::log(mag[kp]), c = std::log(mag[kp + 1]);
  const double den = a - 2.0 * b + c;
  const double off = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
  out.frequency_hz = (static_cast<double>(kp) + off) * df;

  // analytic signal restricted to a band around the tone, log-envelope fit
  const std::size_t m2 = [&] {
    std::size_t q = 1;
    while (q < 2 * n) q <<= 1;
    return q;
  }();
  std::vector<std::complex<double>> z(m2, 0.0), Z(m2);
  for (std::size_t k = 0; k < n; ++k) z[k] = x[k];
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    auto* zi = reinterpret_cast<fftw_complex*>(z.data());
    auto* Zi = reinterpret_cast<fftw_complex*>(Z.data());
    fftw_plan fwd = fftw_plan_dft_1d(static_cast<int>(m2), zi, Zi, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_plan bwd = fftw_plan_dft_1d(static_cast<int>(m2), Zi, zi, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(fwd);
    const double df2 = 1.0 / (static_cast<double>(m2) * dt);
    for (std::size_t k = 0; k < m2; ++k) {
      const double f = static_cast<double>(k) * df2;
      const bool keep = k < m2 / 2 && f >= 0.3 * out.frequency_hz && f <= 1.7 * out.frequency_hz;
      Z[k] = keep ? 2.0 * Z[k] : std::complex<double>(0.0, 0.0);
    }
    fftw_execute(bwd);
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  const std::size_t lo = n / 10, hi = n - n / 10;
  double s0 = 0, s1 = 0, s2 = 0, sy = 0, sty = 0;
  for (std::size_t k = lo; k < hi; ++k) {
    const double env = std::abs(z[k]) / static_cast<double>(m2);
    if (!(env > 0.0)) continue;
    const double y = std::log(env);
    s0 += 1;
    s1 += t[k];
    s2 += t[k] * t[k];
    sy += y;
    sty += t[k] * y;
  }
  out.growth_rate = (s0 * sty - s1 * sy) / (s0 * s2 - s1 * s1);
  return out;
}

}  // namespace freqstab
