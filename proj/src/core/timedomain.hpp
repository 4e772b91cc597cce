#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "converters.hpp"
#include "params.hpp"
#include "timeseries.hpp"

namespace freqstab {

struct ParameterOverride {
  std::string path;
  double value = 0.0;
  double time = 0.0;  // s
};

struct Scenario {
  SystemParams params;
  std::optional<ParameterOverride> change;
  double duration = 10.0;  // s
  double dt = 50e-6;       // s
  double record_dt = 1e-3;  // s, rounded to a multiple of dt
  /// Subset of u_d, u_q, i_d, i_q, omega_v, p, q, dev_pu; empty records all.
/// dev_pu is the per-unit 2-norm of the state deviation from the operating point.
  std::vector<std::string> channels;
  /// Defaults to the operating point of `params`.
  std::optional<Eigen::VectorXd> initial_state;
};

const std::vector<std::string>& simulation_channels();

/// Largest dt * |lambda| accepted for the fixed-step integrator.
inline constexpr double kMaxStepEigenProduct = 2.5;

/// Fixed-step RK4 of the nonlinear model. Stops with a divergence record when a
/// state leaves 1000x its nominal scale. Throws kStepTooLarge from the pre-check.
TimeSeries simulate(const Scenario& sc);

/// Same, returning the final state as well.
TimeSeries simulate(const Scenario& sc, Eigen::VectorXd* final_state);

/// One classical RK4 step of x' = f(x).
template <class F>
void rk4_step(F&& f, Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = f(x);
  const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(x + h * k3);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Oscillation {
  double frequency_hz = 0.0;
  double growth_rate = 0.0;     // 1/s, positive when growing
  double peak_over_median_db = 0.0;
};

/// Slope of log(dev_pu) over [t_start, t_end]: a mode-agnostic growth rate.
double deviation_growth_rate(const TimeSeries& ts, double t_start, double t_end);

struct TimeDomainCheck {
  double growth_rate = 0.0;  // from dev_pu
  bool diverged = false;
  std::optional<Oscillation> tone;
  std::string tone_error;
};

/// Starts `kick_pu` away from the operating point of `p` in every state,
/// simulates `settle + window` seconds and measures growth over the final window.
TimeDomainCheck time_domain_check(const SystemParams& p, double window = 5.0, double settle = 5.0,
                                  double dt = 50e-6, double kick_pu = 1e-5);

/// Dominant tone of the last `window` seconds of a channel. Throws
/// kNoDominantTone when the spectral peak is less than 6 dB over the median.
Oscillation estimate_oscillation(const TimeSeries& ts, const std::string& channel, double window);
Oscillation estimate_oscillation(const std::vector<double>& x, double dt);

}  // namespace freqstab
