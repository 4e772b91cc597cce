#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dual.hpp"
#include "params.hpp"
#include "state_space.hpp"

namespace freqstab {

inline constexpr int kGfmStates = 12;
inline constexpr int kGflStates = 6;
inline constexpr int kSysStates = kGfmStates + kGflStates;

// GFM: i_f(2) v_c(2) i_l(2) P_f Q_f xi_v(2) xi_c(2)
// GFL: i_g(2) xi_g(2) delta xi_pll
const std::vector<std::string>& gfm_state_labels();
const std::vector<std::string>& gfl_state_labels();
std::vector<std::string> system_state_labels();

struct GflGains {
  double k_p, k_i, k_p_pll, k_i_pll;
};
GflGains gfl_gains(const SystemParams& p);

/// Grid-forming side with line and virtual load. u: PCC voltage, dw: extra
/// frame rotation seen by the plant. Outputs droop frequency and the current
/// delivered at the PCC.
template <class T>
void gfm_eval(const SystemParams& p, const T* x, const T* u, T dw, T* dx, T& omega_v, T* i_out) {
  const GfmParams& g = p.gfm;
  const double w0 = p.nominal.omega0();
  const T i_f[2] = {x[0], x[1]};
  const T v_c[2] = {x[2], x[3]};
  const T i_l[2] = {x[4], x[5]};
  const T P_f = x[6], Q_f = x[7];
  const T xi_v[2] = {x[8], x[9]};
  const T xi_c[2] = {x[10], x[11]};

  const T wV = w0 - g.m_p * (P_f - g.P_star);
  const T wr = wV + dw;
  const T Vr = p.V_ref() - g.n_q * (Q_f - g.Q_star);

  const T pm = 1.5 * (v_c[0] * i_l[0] + v_c[1] * i_l[1]);
  const T qm = 1.5 * (v_c[1] * i_l[0] - v_c[0] * i_l[1]);

  const T ev[2] = {Vr - v_c[0], T(0.0) - v_c[1]};
  // J = [[0,-1],[1,0]]
  const T iref[2] = {g.k_pv * ev[0] + g.k_iv * xi_v[0] + g.k_ff_i * i_l[0] - g.k_dec * wV * g.C_f * v_c[1],
                     g.k_pv * ev[1] + g.k_iv * xi_v[1] + g.k_ff_i * i_l[1] + g.k_dec * wV * g.C_f * v_c[0]};
  const T ec[2] = {iref[0] - i_f[0], iref[1] - i_f[1]};
  const T vinv[2] = {g.k_pc * ec[0] + g.k_ic * xi_c[0] + g.k_ff_v * v_c[0] - g.k_dec * wV * g.L_f * i_f[1],
                     g.k_pc * ec[1] + g.k_ic * xi_c[1] + g.k_ff_v * v_c[1] + g.k_dec * wV * g.L_f * i_f[0]};

  const double Ll = p.network.L_line, Rl = p.network.R_line;
  dx[0] = (vinv[0] - v_c[0] - g.R_f * i_f[0] + wr * g.L_f * i_f[1]) / g.L_f;
  dx[1] = (vinv[1] - v_c[1] - g.R_f * i_f[1] - wr * g.L_f * i_f[0]) / g.L_f;
  dx[2] = (i_f[0] - i_l[0] + wr * g.C_f * v_c[1]) / g.C_f;
  dx[3] = (i_f[1] - i_l[1] - wr * g.C_f * v_c[0]) / g.C_f;
  dx[4] = (v_c[0] - u[0] - Rl * i_l[0] + wr * Ll * i_l[1]) / Ll;
  dx[5] = (v_c[1] - u[1] - Rl * i_l[1] - wr * Ll * i_l[0]) / Ll;
  dx[6] = g.omega_c * (pm - P_f);
  dx[7] = g.omega_c * (qm - Q_f);
  dx[8] = ev[0];
  dx[9] = ev[1];
  dx[10] = ec[0];
  dx[11] = ec[1];

  omega_v = wV;
  i_out[0] = i_l[0] - u[0] / p.network.R_load;
  i_out[1] = i_l[1] - u[1] / p.network.R_load;
}

/// Grid-following side in the common frame rotating at omega_v. Output is the
/// current drawn from the PCC.
template <class T>
void gfl_eval(const SystemParams& p, const GflGains& k, const T* x, const T* u, T omega_v, T P, T Q,
              T* dx, T* i_out) {
  using std::cos;
  using std::sin;
  const GflParams& g = p.gfl;
  const double w0 = p.nominal.omega0();
  const T i_g[2] = {x[0], x[1]};
  const T xi_g[2] = {x[2], x[3]};
  const T delta = x[4];
  const T xi_pll = x[5];
  const T c = cos(delta), s = sin(delta);

  // into the PLL frame: rot(-delta)
  const T uc[2] = {c * u[0] + s * u[1], c * u[1] - s * u[0]};
  const T ic[2] = {c * i_g[0] + s * i_g[1], c * i_g[1] - s * i_g[0]};
  const T w_pll = w0 + k.k_p_pll * uc[1] + k.k_i_pll * xi_pll;

  const T istar[2] = {2.0 * P / (3.0 * uc[0]), -2.0 * Q / (3.0 * uc[0])};
  const T e[2] = {istar[0] - ic[0], istar[1] - ic[1]};
  const T vc[2] = {k.k_p * e[0] + k.k_i * xi_g[0] + g.k_ff * uc[0] - g.k_dec * w_pll * g.L_c * ic[1],
                   k.k_p * e[1] + k.k_i * xi_g[1] + g.k_ff * uc[1] + g.k_dec * w_pll * g.L_c * ic[0]};
  const T v[2] = {c * vc[0] - s * vc[1], s * vc[0] + c * vc[1]};

  dx[0] = (v[0] - u[0] - g.R_c * i_g[0] + omega_v * g.L_c * i_g[1]) / g.L_c;
  dx[1] = (v[1] - u[1] - g.R_c * i_g[1] - omega_v * g.L_c * i_g[0]) / g.L_c;
  dx[2] = e[0];
  dx[3] = e[1];
  dx[4] = w_pll - omega_v;
  dx[5] = uc[1];

  i_out[0] = -i_g[0];
  i_out[1] = -i_g[1];
}

/// Interconnected system. dP, dQ perturb the GFL power setpoints.
template <class T>
void system_eval(const SystemParams& p, const GflGains& k, const T* x, T dP, T dQ, T* dx,
                 T* u_out = nullptr, T* omega_out = nullptr, T* i_out = nullptr) {
  const double R = p.network.R_load;
  const T u[2] = {R * (x[4] + x[12]), R * (x[5] + x[13])};
  T wV;
  T i_v[2];
  gfm_eval<T>(p, x, u, T(0.0), dx, wV, i_v);
  T i_c[2];
  gfl_eval<T>(p, k, x + kGfmStates, u, wV, dP + p.gfl.P_set, dQ + p.gfl.Q_set, dx + kGfmStates, i_c);
  if (u_out) {
    u_out[0] = u[0];
    u_out[1] = u[1];
  }
  if (omega_out) *omega_out = wV;
  if (i_out) {
    i_out[0] = i_c[0];
    i_out[1] = i_c[1];
  }
}

/// Time derivative of the full nonlinear system.
Eigen::VectorXd nonlinear_rhs(const SystemParams& p, const Eigen::VectorXd& x, double dP = 0.0,
                              double dQ = 0.0);

/// Characteristic magnitudes of each state and of each derivative row.
Eigen::VectorXd system_state_scale(const SystemParams& p);
Eigen::VectorXd system_residual_scale(const SystemParams& p);
/// Max-norm of the derivative in per-unit.
double residual_pu(const SystemParams& p, const Eigen::VectorXd& x);

struct OperatingPoint {
  Eigen::VectorXd x;  // all states, SI
  Eigen::Vector2d u;  // PCC voltage
  Eigen::Vector2d i;  // current drawn by the GFL
  double omega = 0.0;
  double delta0 = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Damped Newton in per-unit from load-only currents, or from `guess`.
OperatingPoint solve_operating_point(const SystemParams& p,
                                     const std::optional<Eigen::VectorXd>& guess = std::nullopt);

/// Exact (automatic-differentiation) Jacobian of nonlinear_rhs.
Eigen::MatrixXd system_jacobian(const SystemParams& p, const Eigen::VectorXd& x);
/// Central differences with step h_pu times the per-unit state scale.
Eigen::MatrixXd finite_difference_jacobian(const SystemParams& p, const Eigen::VectorXd& x,
                                           double h_pu = 1e-6);

/// Inputs u (2), omega (1); outputs omega (1), i (2).
StateSpaceModel build_gfm_model(const SystemParams& p, const OperatingPoint& op);
/// Inputs pq (2), u (2), omega (1); output i (2). Without `require_equilibrium`
/// the Jacobian is taken wherever `op` lies.
StateSpaceModel build_gfl_model(const SystemParams& p, const OperatingPoint& op, bool require_equilibrium = true);
/// Direct linearization of the interconnected model: input pq; outputs i, u, omega.
StateSpaceModel build_system_model(const SystemParams& p, const OperatingPoint& op);

}  // namespace freqstab
