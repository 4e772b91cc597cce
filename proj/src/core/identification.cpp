#include "identification.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include "error.hpp"
#include "timedomain.hpp"

namespace freqstab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

class GflDevice final : public Device {
 public:
  GflDevice(const SystemParams& p, const OperatingPoint& op) : p_(p), k_(gfl_gains(p)), op_(op) {}
  int states() const override { return kGflStates; }
  int inputs() const override { return 3; }
  int outputs() const override { return 2; }
  Eigen::VectorXd initial_state() const override { return op_.x.tail(kGflStates); }
  Eigen::VectorXd nominal_input() const override { return Eigen::Vector3d(op_.u[0], op_.u[1], op_.omega); }
  void derivative(const Eigen::VectorXd& x, const double* in, Eigen::VectorXd& dx) const override {
    double i[2];
    gfl_eval<double>(p_, k_, x.data(), in, in[2], p_.gfl.P_set, p_.gfl.Q_set, dx.data(), i);
  }
  void output(const Eigen::VectorXd& x, const double*, double* y) const override {
    y[0] = -x[0];
    y[1] = -x[1];
  }

 private:
  SystemParams p_;
  GflGains k_;
  OperatingPoint op_;
};

class GfmDevice final : public Device {
 public:
  GfmDevice(const SystemParams& p, const OperatingPoint& op) : p_(p), op_(op) {}
  int states() const override { return kGfmStates; }
  int inputs() const override { return 2; }
  int outputs() const override { return 3; }
  Eigen::VectorXd initial_state() const override { return op_.x.head(kGfmStates); }
  Eigen::VectorXd nominal_input() const override { return op_.i; }
  void derivative(const Eigen::VectorXd& x, const double* in, Eigen::VectorXd& dx) const override {
    double u[2], w, i[2];
    pcc_voltage(x, in, u);
    gfm_eval<double>(p_, x.data(), u, 0.0, dx.data(), w, i);
  }
  void output(const Eigen::VectorXd& x, const double* in, double* y) const override {
    double u[2], w, i[2];
    pcc_voltage(x, in, u);
    double dx[kGfmStates];
    gfm_eval<double>(p_, x.data(), u, 0.0, dx, w, i);
    y[0] = u[0];
    y[1] = u[1];
    y[2] = w;
  }

 private:
  void pcc_voltage(const Eigen::VectorXd& x, const double* in, double* u) const {
    const double R = p_.network.R_load;
    u[0] = R * (x[4] - in[0]);
    u[1] = R * (x[5] - in[1]);
  }
  SystemParams p_;
  OperatingPoint op_;
};

class LinearDevice final : public Device {
 public:
  LinearDevice(StateSpaceModel m, std::string in, std::string out) : m_(std::move(m)), in_(std::move(in)), out_(std::move(out)) {
    m_.validate();
    B_ = m_.B(in_);
    C_ = m_.C(out_);
    D_ = m_.Dblock(in_, out_);
  }
  int states() const override { return static_cast<int>(m_.n()); }
  int inputs() const override { return static_cast<int>(B_.cols()); }
  int outputs() const override { return static_cast<int>(C_.rows()); }
  Eigen::VectorXd initial_state() const override { return Eigen::VectorXd::Zero(m_.n()); }
  Eigen::VectorXd nominal_input() const override { return Eigen::VectorXd::Zero(B_.cols()); }
  void derivative(const Eigen::VectorXd& x, const double* in, Eigen::VectorXd& dx) const override {
    dx = m_.A * x + B_ * Eigen::Map<const Eigen::VectorXd>(in, B_.cols());
  }
  void output(const Eigen::VectorXd& x, const double* in, double* y) const override {
    Eigen::Map<Eigen::VectorXd>(y, C_.rows()) = C_ * x + D_ * Eigen::Map<const Eigen::VectorXd>(in, B_.cols());
  }
  const StateSpaceModel* linear_model() const override { return &m_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const Eigen::MatrixXd& C() const { return C_; }
  const Eigen::MatrixXd& D() const { return D_; }

 private:
  StateSpaceModel m_;
  std::string in_, out_;
  Eigen::MatrixXd B_, C_, D_;
};

class RlDevice final : public Device {
 public:
  RlDevice(double R, double L, double w0) : R_(R), L_(L), w0_(w0) {}
  int states() const override { return 2; }
  int inputs() const override { return 2; }
  int outputs() const override { return 2; }
  Eigen::VectorXd initial_state() const override { return Eigen::Vector2d::Zero(); }
  Eigen::VectorXd nominal_input() const override { return Eigen::Vector2d::Zero(); }
  void derivative(const Eigen::VectorXd& x, const double* in, Eigen::VectorXd& dx) const override {
    dx[0] = (in[0] - R_ * x[0] + w0_ * L_ * x[1]) / L_;
    dx[1] = (in[1] - R_ * x[1] - w0_ * L_ * x[0]) / L_;
  }
  void output(const Eigen::VectorXd& x, const double*, double* y) const override {
    y[0] = x[0];
    y[1] = x[1];
  }

 private:
  double R_, L_, w0_;
};

struct Job {
  std::size_t freq;
  std::size_t exp;
  double sign;
};

struct JobResult {
  Eigen::VectorXcd in;
  Eigen::VectorXcd out;
  std::vector<std::string> warnings;
};

double ramp(double t, double T) {
  if (T <= 0.0 || t >= T) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * t / T);
}

JobResult run_nonlinear(const Device& dev, int channel, double amp, double f, long settle_steps, long n,
                        double dt, double t_ramp) {
  const int ni = dev.inputs(), no = dev.outputs();
  Eigen::VectorXd x = dev.initial_state();
  const Eigen::VectorXd in0 = dev.nominal_input();
  const double w = kTwoPi * f;
  std::vector<double> in(static_cast<std::size_t>(ni));
  auto input_at = [&](double t) {
    for (int k = 0; k < ni; ++k) in[static_cast<std::size_t>(k)] = in0[k];
    in[static_cast<std::size_t>(channel)] += amp * ramp(t, t_ramp) * std::cos(w * t);
  };
  Eigen::VectorXd k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size());
  std::vector<std::vector<double>> ys(static_cast<std::size_t>(no)), us(static_cast<std::size_t>(ni));
  for (auto& v : ys) v.reserve(static_cast<std::size_t>(n));
  for (auto& v : us) v.reserve(static_cast<std::size_t>(n));
  std::vector<double> y(static_cast<std::size_t>(no));
  const long total = settle_steps + n;
  for (long s = 0; s < total; ++s) {
    const double t = static_cast<double>(s) * dt;
    if (s >= settle_steps) {
      input_at(t);
      dev.output(x, in.data(), y.data());
      for (int k = 0; k < no; ++k) ys[static_cast<std::size_t>(k)].push_back(y[static_cast<std::size_t>(k)]);
      for (int k = 0; k < ni; ++k) us[static_cast<std::size_t>(k)].push_back(in[static_cast<std::size_t>(k)]);
    }
    input_at(t);
    dev.derivative(x, in.data(), k1);
    input_at(t + 0.5 * dt);
    dev.derivative(x + 0.5 * dt * k1, in.data(), k2);
    dev.derivative(x + 0.5 * dt * k2, in.data(), k3);
    input_at(t + dt);
    dev.derivative(x + dt * k3, in.data(), k4);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw Error(ErrorCode::kNonFinite, "device simulation diverged during injection");
  }
  JobResult r;
  r.in.resize(ni);
  r.out.resize(no);
  const double t0 = static_cast<double>(settle_steps) * dt;
  for (int k = 0; k < ni; ++k) r.in[k] = extract_phasor(us[static_cast<std::size_t>(k)], t0, dt, f, &r.warnings);
  for (int k = 0; k < no; ++k) r.out[k] = extract_phasor(ys[static_cast<std::size_t>(k)], t0, dt, f, nullptr);
  return r;
}

JobResult run_linear(const LinearDevice& dev, int channel, double amp, double f, long settle_steps, long n,
                     double dt) {
  const auto& A = dev.linear_model()->A;
  const Eigen::Index nx = A.rows();
  const double w = kTwoPi * f;
  // oscillator states (c, s) generate cos(w t) exactly
  Eigen::MatrixXd Aa = Eigen::MatrixXd::Zero(nx + 2, nx + 2);
  Aa.topLeftCorner(nx, nx) = A;
  Aa.block(0, nx, nx, 1) = amp * dev.B().col(channel);
  Aa(nx, nx + 1) = -w;
  Aa(nx + 1, nx) = w;
  const Eigen::MatrixXd Phi = (Aa * dt).exp();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nx + 2);
  z[nx] = 1.0;
  const int ni = dev.inputs(), no = dev.outputs();
  std::vector<std::vector<double>> ys(static_cast<std::size_t>(no)), us(static_cast<std::size_t>(ni));
  const long total = settle_steps + n;
  for (long s = 0; s < total; ++s) {
    if (s >= settle_steps) {
      Eigen::VectorXd in = Eigen::VectorXd::Zero(ni);
      in[channel] = amp * z[nx];
      const Eigen::VectorXd y = dev.C() * z.head(nx) + dev.D() * in;
      for (int k = 0; k < no; ++k) ys[static_cast<std::size_t>(k)].push_back(y[k]);
      for (int k = 0; k < ni; ++k) us[static_cast<std::size_t>(k)].push_back(in[k]);
    }
    z = Phi * z;
  }
  JobResult r;
  r.in.resize(ni);
  r.out.resize(no);
  const double t0 = static_cast<double>(settle_steps) * dt;
  for (int k = 0; k < ni; ++k) r.in[k] = extract_phasor(us[static_cast<std::size_t>(k)], t0, dt, f, &r.warnings);
  for (int k = 0; k < no; ++k) r.out[k] = extract_phasor(ys[static_cast<std::size_t>(k)], t0, dt, f, nullptr);
  return r;
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(worker_count(), static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = next++; k < n; k = next++) body(k);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

constexpr double kMaxCondition = 1e3;

Eigen::MatrixXcd solve_experiments(const Eigen::MatrixXcd& out, const Eigen::MatrixXcd& in, double f) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(in);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxCondition)) {
    throw Error(ErrorCode::kIllConditioned, "injection matrix condition number " + std::to_string(cond) + " at " +
                                                std::to_string(f) + " Hz");
  }
  return out * in.inverse();
}

std::vector<int> pick_channels(const InjectionPlan& plan, std::vector<int> fallback) {
  std::vector<int> sorted = plan.channels;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> want = fallback;
  std::sort(want.begin(), want.end());
  return sorted == want ? plan.channels : fallback;
}

}  // namespace

std::unique_ptr<Device> make_gfl_device(const SystemParams& p, const OperatingPoint& op) {
  return std::make_unique<GflDevice>(p, op);
}

std::unique_ptr<Device> make_gfm_device(const SystemParams& p, const OperatingPoint& op) {
  return std::make_unique<GfmDevice>(p, op);
}

std::unique_ptr<Device> make_rl_device(double R, double L, double omega0) {
  if (!(R > 0.0) || !(L > 0.0)) throw Error(ErrorCode::kInvalidArgument, "RL branch needs R, L > 0");
  return std::make_unique<RlDevice>(R, L, omega0);
}

std::unique_ptr<Device> make_linear_device(const StateSpaceModel& m, const std::string& input,
                                           const std::string& output) {
  return std::make_unique<LinearDevice>(m, input, output);
}

StateSpaceModel rl_branch_model(double R, double L, double omega0) {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << -R / L, omega0, -omega0, -R / L;
  m.state_labels = {"i_d", "i_q"};
  m.add_input("u", Eigen::Matrix2d::Identity() / L);
  m.add_output("i", Eigen::Matrix2d::Identity());
  m.validate();
  return m;
}

std::complex<double> extract_phasor(const std::vector<double>& x, double t0, double dt, double f_hz,
                                    std::vector<std::string>* warnings) {
  if (x.empty()) throw Error(ErrorCode::kEmptyDataset, "no samples");
  if (!(f_hz > 0.0) || !(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "phasor needs f > 0 and dt > 0");
  const double n = static_cast<double>(x.size());
  const double periods = n * dt * f_hz;
  if (warnings && std::abs(periods - std::round(periods)) > 1e-6 * periods) {
    warnings->push_back("window is not coherent at " + std::to_string(f_hz) + " Hz (" + std::to_string(periods) +
                        " periods); expect leakage");
  }
  std::complex<double> acc(0.0, 0.0);
  const double w = kTwoPi * f_hz;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    acc += x[k] * std::polar(1.0, -w * t);
  }
  return 2.0 * acc / n;
}

std::complex<double> extract_phasor(const TimeSeries& ts, const std::string& channel, double f_hz,
                                    std::vector<std::string>* warnings) {
  return extract_phasor(ts.channel(channel), ts.t0, ts.dt, f_hz, warnings);
}

CoherentWindow coherent_window(double f_hz, const InjectionPlan& plan) {
  if (!(f_hz > 0.0)) throw Error(ErrorCode::kInvalidArgument, "injection frequency must be > 0");
  const int periods = std::max(plan.min_periods, static_cast<int>(std::ceil(plan.min_window * f_hz - 1e-9)));
  const long n = std::lround(periods / (f_hz * plan.dt));
  if (n < 8) throw Error(ErrorCode::kInvalidArgument, "injection frequency too high for the step size");
  return {periods / (static_cast<double>(n) * plan.dt), n, periods};
}

unsigned worker_count() {
  if (const char* env = std::getenv("FREQSTAB_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

ExperimentSet run_experiments(const Device& dev, const InjectionPlan& plan) {
  if (plan.freq_hz.empty()) throw Error(ErrorCode::kEmptyDataset, "injection plan has no frequencies");
  if (plan.channels.empty()) throw Error(ErrorCode::kInvalidArgument, "injection plan has no channels");
  if (plan.min_periods < 5) throw Error(ErrorCode::kConfigInvalid, "window must hold at least 5 periods");
  if (!(plan.dt > 0.0)) throw Error(ErrorCode::kConfigInvalid, "step must be > 0");
  for (int c : plan.channels) {
    if (c < 0 || c >= dev.inputs() || static_cast<std::size_t>(c) >= plan.amplitude.size()) {
      throw Error(ErrorCode::kInvalidArgument, "injection channel out of range");
    }
    if (!(plan.amplitude[static_cast<std::size_t>(c)] > 0.0)) {
      throw Error(ErrorCode::kConfigInvalid, "injection amplitudes must be > 0");
    }
  }
  const double settle = std::max(plan.settle, 20.0 / plan.fundamental_hz);
  const long settle_steps = std::lround(settle / plan.dt);
  const auto* lin = dynamic_cast<const LinearDevice*>(&dev);

  std::vector<CoherentWindow> win;
  for (double f : plan.freq_hz) win.push_back(coherent_window(f, plan));
  const std::size_t nc = plan.channels.size();
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < win.size(); ++k) {
    for (std::size_t e = 0; e < nc; ++e) {
      jobs.push_back({k, e, 1.0});
      if (plan.symmetric && !lin) jobs.push_back({k, e, -1.0});
    }
  }
  std::vector<JobResult> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const int ch = plan.channels[job.exp];
    const double amp = job.sign * plan.amplitude[static_cast<std::size_t>(ch)];
    const auto& w = win[job.freq];
    results[j] = lin ? run_linear(*lin, ch, amp, w.f_hz, settle_steps, w.samples, plan.dt)
                     : run_nonlinear(dev, ch, amp, w.f_hz, settle_steps, w.samples, plan.dt, 0.5 * settle);
  });

  ExperimentSet out;
  for (std::size_t k = 0; k < win.size(); ++k) {
    out.freq_hz.push_back(win[k].f_hz);
    out.in.emplace_back(Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nc)));
    out.out.emplace_back(Eigen::MatrixXcd::Zero(dev.outputs(), static_cast<Eigen::Index>(nc)));
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const double wgt = (plan.symmetric && !lin) ? 0.5 * job.sign : 1.0;
    for (std::size_t r = 0; r < nc; ++r) {
      out.in[job.freq](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(job.exp)) +=
          wgt * results[j].in[plan.channels[r]];
    }
    out.out[job.freq].col(static_cast<Eigen::Index>(job.exp)) += wgt * results[j].out;
    for (auto& w : results[j].warnings) out.warnings.push_back(std::move(w));
  }
  for (std::size_t k = 0; k + 1 < out.freq_hz.size(); ++k) {
    if (!(out.freq_hz[k + 1] > out.freq_hz[k])) {
      throw Error(ErrorCode::kInvalidArgument, "snapped injection frequencies are not strictly increasing");
    }
  }
  return out;
}

TransferSamples identify_admittance(const Device& dev, const InjectionPlan& plan) {
  InjectionPlan pl = plan;
  pl.channels = pick_channels(plan, {0, 1});
  const ExperimentSet ex = run_experiments(dev, pl);
  TransferSamples Y(2, 2);
  for (std::size_t k = 0; k < ex.freq_hz.size(); ++k) {
    Y.push_back(ex.freq_hz[k], solve_experiments(ex.out[k].topRows(2), ex.in[k], ex.freq_hz[k]));
  }
  Y.warnings = ex.warnings;
  Y.validate();
  return Y;
}

VsmIdentification identify_impedance(const Device& gfm, const InjectionPlan& plan) {
  if (gfm.outputs() != 3 || gfm.inputs() != 2) {
    throw Error(ErrorCode::kDimensionMismatch, "impedance identification needs a current-driven device");
  }
  InjectionPlan pl = plan;
  pl.channels = pick_channels(plan, {0, 1});
  const ExperimentSet ex = run_experiments(gfm, pl);
  VsmIdentification r{TransferSamples(2, 2), TransferSamples(1, 2)};
  for (std::size_t k = 0; k < ex.freq_hz.size(); ++k) {
    const Eigen::MatrixXcd G = solve_experiments(ex.out[k], ex.in[k], ex.freq_hz[k]);
    r.Zv.push_back(ex.freq_hz[k], -G.topRows(2));
    r.Gv.push_back(ex.freq_hz[k], G.bottomRows(1));
  }
  r.Zv.warnings = ex.warnings;
  r.Gv.warnings = ex.warnings;
  r.Zv.validate();
  r.Gv.validate();
  return r;
}

TransferSamples identify_frequency_vector(const Device& gfl, const InjectionPlan& plan) {
  if (gfl.inputs() != 3) throw Error(ErrorCode::kDimensionMismatch, "frequency injection needs a frequency input");
  InjectionPlan pl = plan;
  pl.channels = {2};
  const ExperimentSet ex = run_experiments(gfl, pl);
  TransferSamples P(2, 1);
  for (std::size_t k = 0; k < ex.freq_hz.size(); ++k) {
    P.push_back(ex.freq_hz[k], solve_experiments(ex.out[k], ex.in[k], ex.freq_hz[k]));
  }
  P.warnings = ex.warnings;
  P.validate();
  return P;
}

InjectionPlan default_plan(const SystemParams& p, const std::vector<double>& freq_hz, const std::string& kind,
                           double amplitude, double omega_amplitude) {
  if (!(amplitude > 0.0 && amplitude <= 0.02) || !(omega_amplitude > 0.0 && omega_amplitude <= 0.02)) {
    throw Error(ErrorCode::kConfigInvalid, "injection amplitudes must be in (0, 2%] of nominal");
  }
  InjectionPlan plan;
  plan.freq_hz = freq_hz;
  plan.fundamental_hz = p.nominal.f;
  const double V = p.nominal.V_peak(), I = p.nominal.I_peak(), w0 = p.nominal.omega0();
  if (kind == "gfl") {
    plan.amplitude = {amplitude * V, amplitude * V, omega_amplitude * w0};
    plan.channels = {0, 1};
  } else if (kind == "gfm") {
    plan.amplitude = {amplitude * I, amplitude * I};
    plan.channels = {0, 1};
  } else if (kind == "rl") {
    plan.amplitude = {amplitude * V, amplitude * V};
    plan.channels = {0, 1};
  } else {
    throw Error(ErrorCode::kConfigInvalid, "unknown device kind '" + kind + "'");
  }
  return plan;
}

double max_relative_error(const TransferSamples& a, const TransferSamples& b, double f_max_hz) {
  if (a.size() != b.size() || a.rows != b.rows || a.cols != b.cols) {
    throw Error(ErrorCode::kGridMismatch, "samples differ in grid or shape");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.freq_hz[k] > f_max_hz) continue;
    const double den = b.values[k].norm();
    worst = std::max(worst, (a.values[k] - b.values[k]).norm() / std::max(den, 1e-300));
  }
  return worst;
}

}  // namespace freqstab
