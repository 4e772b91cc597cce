#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "converters.hpp"
#include "loci.hpp"
#include "params.hpp"
#include "state_space.hpp"
#include "timeseries.hpp"

namespace freqstab {

/// A system under test with absolute-valued inputs and outputs.
class Device {
 public:
  virtual ~Device() = default;
  virtual int states() const = 0;
  virtual int inputs() const = 0;
  virtual int outputs() const = 0;
  virtual Eigen::VectorXd initial_state() const = 0;
  virtual Eigen::VectorXd nominal_input() const = 0;
  virtual void derivative(const Eigen::VectorXd& x, const double* in, Eigen::VectorXd& dx) const = 0;
  virtual void output(const Eigen::VectorXd& x, const double* in, double* y) const = 0;
  /// Linear devices are advanced with the exact discretization instead of RK4.
  virtual const StateSpaceModel* linear_model() const { return nullptr; }
};

/// Grid-following converter driven by PCC voltage (u_d, u_q) and frame
/// frequency; outputs the current drawn (i_d, i_q).
std::unique_ptr<Device> make_gfl_device(const SystemParams& p, const OperatingPoint& op);
/// Grid-forming converter with line and load, driven by the current drawn at
/// the PCC; outputs (u_d, u_q, omega_v).
std::unique_ptr<Device> make_gfm_device(const SystemParams& p, const OperatingPoint& op);
/// Series RL branch in a frame rotating at omega0; input u, output i.
std::unique_ptr<Device> make_rl_device(double R, double L, double omega0);
/// Linear model between the named ports (states start at zero).
std::unique_ptr<Device> make_linear_device(const StateSpaceModel& m, const std::string& input,
                                           const std::string& output);

/// Dq RL branch as a state-space model: input u, output i.
StateSpaceModel rl_branch_model(double R, double L, double omega0);

/// Single-bin DFT (2/N) sum x e^{-j 2 pi f t}; a sine of unit amplitude gives -j.
/// Adds a warning when the samples do not span an integer number of periods.
std::complex<double> extract_phasor(const std::vector<double>& x, double t0, double dt, double f_hz,
                                    std::vector<std::string>* warnings = nullptr);
std::complex<double> extract_phasor(const TimeSeries& ts, const std::string& channel, double f_hz,
                                    std::vector<std::string>* warnings = nullptr);

struct InjectionPlan {
  std::vector<double> freq_hz;
  std::vector<double> amplitude;     // per injection channel, absolute units
  std::vector<int> channels;         // device input indices, one experiment each
  double settle = 4.0;               // s before the window, at least 20 periods of the fundamental
  double min_window = 0.5;           // s
  int min_periods = 5;
  double dt = 50e-6;
  bool symmetric = true;             // difference of +a and -a runs cancels even-order terms
  double fundamental_hz = 50.0;
};

/// Injection frequency actually used and the window in samples.
struct CoherentWindow {
  double f_hz;
  long samples;
  int periods;
};
CoherentWindow coherent_window(double f_hz, const InjectionPlan& plan);

/// Output phasors of every experiment: result[k] is outputs x channels for frequency k.
struct ExperimentSet {
  std::vector<double> freq_hz;        // snapped
  std::vector<Eigen::MatrixXcd> in;   // injected phasors (channels x channels)
  std::vector<Eigen::MatrixXcd> out;  // outputs x channels
  std::vector<std::string> warnings;
};
ExperimentSet run_experiments(const Device& dev, const InjectionPlan& plan);

/// 2x2 admittance from u_d / u_q injections (channels 0 and 1).
TransferSamples identify_admittance(const Device& dev, const InjectionPlan& plan);
/// Z_V and Gamma_V of a current-driven grid-forming device from two current injections.
struct VsmIdentification {
  TransferSamples Zv;
  TransferSamples Gv;
};
VsmIdentification identify_impedance(const Device& gfm, const InjectionPlan& plan);
/// Psi_C from one frequency injection (input channel 2 of the GFL device).
TransferSamples identify_frequency_vector(const Device& gfl, const InjectionPlan& plan);

/// Default plan for a device kind: "gfl", "gfm" or "rl".
InjectionPlan default_plan(const SystemParams& p, const std::vector<double>& freq_hz, const std::string& kind,
                           double amplitude = 0.005, double omega_amplitude = 0.0005);

/// Worker threads, from FREQSTAB_WORKERS (default: hardware concurrency).
unsigned worker_count();

/// Max over the grid of ||A_k - B_k||_F / ||B_k||_F.
double max_relative_error(const TransferSamples& a, const TransferSamples& b, double f_max_hz = 1e300);

}  // namespace freqstab
