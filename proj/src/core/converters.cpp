#include "converters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace freqstab {

const std::vector<std::string>& gfm_state_labels() {
  static const std::vector<std::string> l = {"i_f_d", "i_f_q", "v_c_d", "v_c_q", "i_l_d", "i_l_q",
                                             "P_f",   "Q_f",   "xi_v_d", "xi_v_q", "xi_c_d", "xi_c_q"};
  return l;
}

const std::vector<std::string>& gfl_state_labels() {
  static const std::vector<std::string> l = {"i_g_d", "i_g_q", "xi_g_d", "xi_g_q", "delta", "xi_pll"};
  return l;
}

std::vector<std::string> system_state_labels() {
  auto l = gfm_state_labels();
  const auto& c = gfl_state_labels();
  l.insert(l.end(), c.begin(), c.end());
  return l;
}

GflGains gfl_gains(const SystemParams& p) {
  const auto c = current_gains(p.gfl);
  const auto g = pll_gains(p.gfl, p.nominal.V_peak());
  return {c.k_p, c.k_i, g.k_p, g.k_i};
}

namespace {

/// Columns of d(outputs)/d(inputs) by one forward pass per input.
template <class F>
Eigen::MatrixXd ad_jacobian(F&& f, const Eigen::VectorXd& x0, Eigen::Index m) {
  const Eigen::Index n = x0.size();
  Eigen::MatrixXd J(m, n);
  std::vector<Dual> in(static_cast<std::size_t>(n));
  std::vector<Dual> out(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = Dual(x0[i], i == k ? 1.0 : 0.0);
    f(in, out);
    for (Eigen::Index r = 0; r < m; ++r) J(r, k) = out[static_cast<std::size_t>(r)].d;
  }
  return J;
}

void check_finite(const Eigen::MatrixXd& M, const char* what) {
  if (!M.allFinite()) throw Error(ErrorCode::kNonFinite, std::string("non-finite entries in ") + what);
}

Eigen::VectorXd gfm_residual_scale(const SystemParams& p) {
  return system_residual_scale(p).head(kGfmStates);
}

Eigen::VectorXd gfl_residual_scale(const SystemParams& p) {
  return system_residual_scale(p).tail(kGflStates);
}

constexpr double kModelResidualTol = 1e-6;

void store_d(StateSpaceModel& m, const std::string& in, const std::string& out, const Eigen::MatrixXd& d) {
  if (d.cwiseAbs().maxCoeff() > 0.0) m.D[{in, out}] = d;
}

}  // namespace

Eigen::VectorXd nonlinear_rhs(const SystemParams& p, const Eigen::VectorXd& x, double dP, double dQ) {
  if (x.size() != kSysStates) throw Error(ErrorCode::kDimensionMismatch, "state vector length");
  Eigen::VectorXd dx(kSysStates);
  const auto k = gfl_gains(p);
  system_eval<double>(p, k, x.data(), dP, dQ, dx.data());
  return dx;
}

Eigen::VectorXd system_state_scale(const SystemParams& p) {
  const double V = p.nominal.V_peak(), I = p.nominal.I_peak(), S = p.nominal.P_rated;
  const double w0 = p.nominal.omega0();
  Eigen::VectorXd s(kSysStates);
  s << I, I, V, V, I, I, S, S, V / w0, V / w0, I / w0, I / w0,  //
      I, I, I / w0, I / w0, 1.0, V / w0;
  return s;
}

Eigen::VectorXd system_residual_scale(const SystemParams& p) {
  const double V = p.nominal.V_peak(), I = p.nominal.I_peak(), S = p.nominal.P_rated;
  const double w0 = p.nominal.omega0();
  Eigen::VectorXd s(kSysStates);
  s << I * w0, I * w0, V * w0, V * w0, I * w0, I * w0, S * w0, S * w0, V, V, I, I,  //
      I * w0, I * w0, I, I, w0, V;
  return s;
}

double residual_pu(const SystemParams& p, const Eigen::VectorXd& x) {
  return nonlinear_rhs(p, x).cwiseQuotient(system_residual_scale(p)).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd system_jacobian(const SystemParams& p, const Eigen::VectorXd& x) {
  const auto k = gfl_gains(p);
  return ad_jacobian(
      [&](const std::vector<Dual>& in, std::vector<Dual>& out) {
        system_eval<Dual>(p, k, in.data(), Dual(0.0), Dual(0.0), out.data());
      },
      x, kSysStates);
}

Eigen::MatrixXd finite_difference_jacobian(const SystemParams& p, const Eigen::VectorXd& x, double h_pu) {
  const Eigen::VectorXd scale = system_state_scale(p);
  Eigen::MatrixXd J(kSysStates, kSysStates);
  for (int k = 0; k < kSysStates; ++k) {
    const double h = h_pu * scale[k];
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    J.col(k) = (nonlinear_rhs(p, xp) - nonlinear_rhs(p, xm)) / (2.0 * h);
  }
  return J;
}

OperatingPoint solve_operating_point(const SystemParams& p, const std::optional<Eigen::VectorXd>& guess) {
  p.validate();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kSysStates);
  if (guess) {
    if (guess->size() != kSysStates) throw Error(ErrorCode::kDimensionMismatch, "initial guess length");
    x = *guess;
  } else {
    // nominal voltage, zero angle, converter currents feeding the load only
    const double V = p.V_ref();
    x[2] = V;
    x[4] = V / p.network.R_load;
    x[0] = x[4];
  }
  const Eigen::VectorXd sx = system_state_scale(p);
  const Eigen::VectorXd sr = system_residual_scale(p);
  auto res = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(nonlinear_rhs(p, z).cwiseQuotient(sr)); };

  constexpr int kMaxIter = 50;
  constexpr double kTol = 1e-9;
  Eigen::VectorXd r = res(x);
  double norm = r.cwiseAbs().maxCoeff();
  int it = 0;
  while (it < kMaxIter && norm >= 1e-13) {
    Eigen::MatrixXd J = system_jacobian(p, x);
    J = sr.cwiseInverse().asDiagonal() * J * sx.asDiagonal();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) throw Error(ErrorCode::kNoConvergence, "singular Jacobian during Newton");
    const Eigen::VectorXd step = sx.cwiseProduct(lu.solve(-r));
    double alpha = 1.0;
    Eigen::VectorXd xn, rn;
    double nn = std::numeric_limits<double>::infinity();
    for (int ls = 0; ls < 30; ++ls) {
      xn = x + alpha * step;
      rn = res(xn);
      nn = rn.allFinite() ? rn.norm() : std::numeric_limits<double>::infinity();
      if (nn < (1.0 - 1e-4 * alpha) * r.norm()) break;
      alpha *= 0.5;
    }
    if (!(nn < r.norm())) break;  // stalled at rounding level
    x = xn;
    r = rn;
    norm = r.cwiseAbs().maxCoeff();
    ++it;
  }
  if (!(norm < kTol)) {
    throw Error(ErrorCode::kNoConvergence,
                "operating point not found within 50 Newton iterations (residual " + std::to_string(norm) + ")");
  }
  OperatingPoint op;
  op.x = x;
  const double R = p.network.R_load;
  op.u = Eigen::Vector2d(R * (x[4] + x[12]), R * (x[5] + x[13]));
  op.i = Eigen::Vector2d(-x[12], -x[13]);
  op.omega = p.nominal.omega0() - p.gfm.m_p * (x[6] - p.gfm.P_star);
  op.delta0 = x[16];
  op.residual = norm;
  op.iterations = it;
  return op;
}

StateSpaceModel build_gfm_model(const SystemParams& p, const OperatingPoint& op) {
  if (op.x.size() != kSysStates) throw Error(ErrorCode::kDimensionMismatch, "operating point length");
  constexpr int n = kGfmStates;
  Eigen::VectorXd z(n + 3);
  z << op.x.head(n), op.u, 0.0;
  {
    double dx[n], w, i[2];
    gfm_eval<double>(p, z.data(), z.data() + n, 0.0, dx, w, i);
    const double r = Eigen::Map<Eigen::VectorXd>(dx, n).cwiseQuotient(gfm_residual_scale(p)).cwiseAbs().maxCoeff();
    if (!(r < kModelResidualTol)) {
      throw Error(ErrorCode::kOperatingPointMismatch, "operating point is not an equilibrium of the GFM model");
    }
  }
  const Eigen::MatrixXd J = ad_jacobian(
      [&](const std::vector<Dual>& in, std::vector<Dual>& out) {
        Dual w, i[2];
        gfm_eval<Dual>(p, in.data(), in.data() + n, in[n + 2], out.data(), w, i);
        out[n] = w;
        out[n + 1] = i[0];
        out[n + 2] = i[1];
      },
      z, n + 3);
  check_finite(J, "GFM linearization");
  StateSpaceModel m;
  m.A = J.topLeftCorner(n, n);
  m.state_labels = gfm_state_labels();
  m.add_input("u", J.block(0, n, n, 2));
  m.add_input("omega", J.block(0, n + 2, n, 1));
  m.add_output("omega", J.block(n, 0, 1, n));
  m.add_output("i", J.block(n + 1, 0, 2, n));
  store_d(m, "u", "omega", J.block(n, n, 1, 2));
  store_d(m, "omega", "omega", J.block(n, n + 2, 1, 1));
  store_d(m, "u", "i", J.block(n + 1, n, 2, 2));
  store_d(m, "omega", "i", J.block(n + 1, n + 2, 2, 1));
  m.validate();
  return m;
}

StateSpaceModel build_gfl_model(const SystemParams& p, const OperatingPoint& op, bool require_equilibrium) {
  if (op.x.size() != kSysStates) throw Error(ErrorCode::kDimensionMismatch, "operating point length");
  constexpr int n = kGflStates;
  const auto k = gfl_gains(p);
  // x_C, P, Q, u, omega
  Eigen::VectorXd z(n + 5);
  z << op.x.tail(n), p.gfl.P_set, p.gfl.Q_set, op.u, op.omega;
  if (require_equilibrium) {
    double dx[n], i[2];
    gfl_eval<double>(p, k, z.data(), z.data() + n + 2, z[n + 4], z[n], z[n + 1], dx, i);
    const double r = Eigen::Map<Eigen::VectorXd>(dx, n).cwiseQuotient(gfl_residual_scale(p)).cwiseAbs().maxCoeff();
    if (!(r < kModelResidualTol)) {
      throw Error(ErrorCode::kOperatingPointMismatch, "operating point is not an equilibrium of the GFL model");
    }
  }
  const Eigen::MatrixXd J = ad_jacobian(
      [&](const std::vector<Dual>& in, std::vector<Dual>& out) {
        Dual i[2];
        gfl_eval<Dual>(p, k, in.data(), in.data() + n + 2, in[n + 4], in[n], in[n + 1], out.data(), i);
        out[n] = i[0];
        out[n + 1] = i[1];
      },
      z, n + 2);
  check_finite(J, "GFL linearization");
  StateSpaceModel m;
  m.A = J.topLeftCorner(n, n);
  m.state_labels = gfl_state_labels();
  m.add_input("pq", J.block(0, n, n, 2));
  m.add_input("u", J.block(0, n + 2, n, 2));
  m.add_input("omega", J.block(0, n + 4, n, 1));
  m.add_output("i", J.block(n, 0, 2, n));
  store_d(m, "pq", "i", J.block(n, n, 2, 2));
  store_d(m, "u", "i", J.block(n, n + 2, 2, 2));
  store_d(m, "omega", "i", J.block(n, n + 4, 2, 1));
  m.validate();
  return m;
}

StateSpaceModel build_system_model(const SystemParams& p, const OperatingPoint& op) {
  if (op.x.size() != kSysStates) throw Error(ErrorCode::kDimensionMismatch, "operating point length");
  if (!(residual_pu(p, op.x) < kModelResidualTol)) {
    throw Error(ErrorCode::kOperatingPointMismatch, "operating point is not an equilibrium");
  }
  constexpr int n = kSysStates;
  const auto k = gfl_gains(p);
  Eigen::VectorXd z(n + 2);
  z << op.x, 0.0, 0.0;
  const Eigen::MatrixXd J = ad_jacobian(
      [&](const std::vector<Dual>& in, std::vector<Dual>& out) {
        Dual u[2], w, i[2];
        system_eval<Dual>(p, k, in.data(), in[n], in[n + 1], out.data(), u, &w, i);
        out[n] = i[0];
        out[n + 1] = i[1];
        out[n + 2] = u[0];
        out[n + 3] = u[1];
        out[n + 4] = w;
      },
      z, n + 5);
  check_finite(J, "system linearization");
  StateSpaceModel m;
  m.A = J.topLeftCorner(n, n);
  m.state_labels = system_state_labels();
  m.add_input("pq", J.block(0, n, n, 2));
  m.add_output("i", J.block(n, 0, 2, n));
  m.add_output("u", J.block(n + 2, 0, 2, n));
  m.add_output("omega", J.block(n + 4, 0, 1, n));
  store_d(m, "pq", "i", J.block(n, n, 2, 2));
  store_d(m, "pq", "u", J.block(n + 2, n, 2, 2));
  store_d(m, "pq", "omega", J.block(n + 4, n, 1, 2));
  m.validate();
  return m;
}

}  // namespace freqstab
