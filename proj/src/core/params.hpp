#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace freqstab {

struct Nominal {
  double P_rated = 15000.0;  // W
  double V_ll = 400.0;       // V line-line RMS
  double f = 50.0;           // Hz

  double omega0() const;
  double V_peak() const;  // dq amplitude of the phase voltage
  double I_peak() const;
};

/// Grid-forming converter: droop, voltage and current PI, LC filter.
struct GfmParams {
  double L_f = 2.3e-3;
  double R_f = 0.1;
  double C_f = 10e-6;
  double m_p = 4e-5;    // (rad/s)/W
  double n_q = 2.1e-4;  // V/var
  double omega_c = 2.0 * 3.14159265358979323846 * 10.0;
  double k_pv = 0.1;
  double k_iv = 22.0;
  double k_pc = 2.3;
  double k_ic = 100.0;
  double P_star = 0.0;
  double Q_star = 0.0;
  double V_star = 0.0;  // dq amplitude setpoint; 0 selects the nominal peak
  // feed-forward / decoupling switches (1 = on)
  double k_ff_i = 1.0;  // load current feed-forward in the voltage loop
  double k_ff_v = 1.0;  // capacitor voltage feed-forward in the current loop
  double k_dec = 1.0;   // dq cross-coupling compensation
};

struct NetworkParams {
  double L_line = 7e-3;
  double R_line = 0.4;
  double R_load = 6.0;
};

/// Grid-following converter: SRF-PLL, current PI, L filter.
struct GflParams {
  double L_c = 3.1e-3;
  double R_c = 0.1;
  double alpha_c = 100.0;   // current-loop bandwidth, rad/s
  double alpha_pll = 2.0 * 3.14159265358979323846;  // PLL -3 dB bandwidth, rad/s
  double zeta = 0.707;
  double k_ff = 0.13;   // PCC voltage feed-forward
  double k_dec = 1.0;   // dq decoupling
  double P_set = 5500.0;
  double Q_set = -3200.0;
  // explicit gains override the bandwidth mappings when set
  std::optional<double> k_p;
  std::optional<double> k_i;
  std::optional<double> k_p_pll;
  std::optional<double> k_i_pll;
};

struct SystemParams {
  Nominal nominal;
  GfmParams gfm;
  NetworkParams network;
  GflParams gfl;

  double V_ref() const;
  void validate() const;
};

struct PllGains {
  double k_p;
  double k_i;
  double omega_n;
};

/// PI gains placing the closed SRF-PLL -3 dB bandwidth at alpha (rad/s).
PllGains pll_gains(double alpha, double zeta, double V_peak);

struct CurrentGains {
  double k_p;
  double k_i;
};
CurrentGains current_gains(const GflParams& p);
PllGains pll_gains(const GflParams& p, double V_peak);

/// Dotted parameter paths, e.g. "gfl.alpha_c" or "network.L_line".
std::vector<std::string> parameter_paths();
double get_param(const SystemParams& p, const std::string& path);
void set_param(SystemParams& p, const std::string& path, double value);
bool has_param(const std::string& path);

struct GridSpec {
  double f_min = 1e-2;
  double f_max = 1e4;
  double points_per_decade = 100.0;
};

struct SweepSpec {
  std::string name;
  std::vector<std::string> paths;
  std::vector<std::vector<double>> values;  // values[path][config]
  std::size_t count() const;
  SystemParams apply(const SystemParams& base, std::size_t k) const;
  std::string label(std::size_t k) const;
};

/// Parses "path=v1,v2,..." (several comma lists may be joined with ';').
SweepSpec parse_sweep(const std::string& name, const std::string& text);

struct SimSettings {
  double duration = 10.0;
  double dt = 50e-6;
  double record_dt = 1e-3;
  std::string override_path;
  double override_value = 0.0;
  double override_time = 0.0;
};

struct IdentifySettings {
  std::string device = "gfl";  // gfl | gfm | rl
  double f_min = 0.2;
  double f_max = 100.0;
  int count = 20;
  double amplitude = 0.005;        // fraction of nominal voltage / current
  double omega_amplitude = 0.0005;  // fraction of nominal angular frequency
  double settle = 4.0;             // s
  double dt = 50e-6;
};

struct Config {
  SystemParams system;
  GridSpec grid;
  std::vector<SweepSpec> sweeps;
  SimSettings sim;
  IdentifySettings identify;
};

/// Sections: nominal, gfm, network, gfl, grid, sim, identify, sweep.<name>.
/// Throws kConfigInvalid on unknown keys or malformed values.
Config load_config(const std::string& path);
Config parse_config(const std::string& text);

}  // namespace freqstab
