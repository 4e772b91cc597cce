#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "converters.hpp"
#include "error.hpp"
#include "extraction.hpp"
#include "helpers.hpp"
#include "identification.hpp"
#include "params.hpp"
#include "timedomain.hpp"

using namespace freqstab;
using testing::cd;
using testing::kPi;

namespace {

/// Largest per-unit relative entry difference with an absolute floor.
double pu_relative_gap(const SystemParams& p, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd sx = system_state_scale(p), sr = system_residual_scale(p);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double ap = a(i, j) * sx[j] / sr[i], bp = b(i, j) * sx[j] / sr[i];
      worst = std::max(worst, std::abs(ap - bp) / std::max(std::abs(bp), 1e-3));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("operating point: default case converges to an equilibrium") {
  const SystemParams p;
  const OperatingPoint op = solve_operating_point(p);
  CHECK(op.residual < 1e-9);
  CHECK(nonlinear_rhs(p, op.x).norm() < 1e-8);
}

TEST_CASE("operating point: zero setpoints leave only the load current") {
  SystemParams p;
  p.gfl.P_set = 0.0;
  p.gfl.Q_set = 0.0;
  const OperatingPoint op = solve_operating_point(p);
  CHECK(op.residual < 1e-9);
  // no GFL current
  CHECK(std::abs(op.x[kGfmStates + 0]) < 1e-9);
  CHECK(std::abs(op.x[kGfmStates + 1]) < 1e-9);
  // line current equals load current u / R_load
  CHECK((op.x.segment(4, 2) - op.u / p.network.R_load).norm() < 1e-9);
  // PLL angle aligns its frame with the PCC voltage
  CHECK(std::abs(std::remainder(op.x[kGfmStates + 4] - std::atan2(op.u[1], op.u[0]), 2 * kPi)) < 1e-9);
  // PCC voltage is the divider of the capacitor voltage over line and load
  const cd vc(op.x[2], op.x[3]);
  const cd z_line(p.network.R_line, op.omega * p.network.L_line);
  const cd u_expect = vc * p.network.R_load / (p.network.R_load + z_line);
  CHECK(std::abs(cd(op.u[0], op.u[1]) - u_expect) < 1e-9 * std::abs(vc));
}

TEST_CASE("operating point: 5 kW setpoint through the 7 mH line is met by the power flow") {
  SystemParams p;
  p.gfl.P_set = 5000.0;
  p.network.R_line = 0.4;
  p.network.L_line = 7e-3;
  const OperatingPoint op = solve_operating_point(p);
  CHECK(op.residual < 1e-9);
  const double ig_d = op.x[kGfmStates], ig_q = op.x[kGfmStates + 1];
  const double P = 1.5 * (op.u[0] * ig_d + op.u[1] * ig_q);
  const double Q = 1.5 * (op.u[1] * ig_d - op.u[0] * ig_q);
  CHECK(std::abs(P - p.gfl.P_set) < 1e-6 * std::abs(p.gfl.P_set));
  CHECK(std::abs(Q - p.gfl.Q_set) < 1e-6 * std::abs(p.gfl.Q_set));
}

TEST_CASE("operating point: doubling setpoints doubles delivered power and scales currents by the voltage ratio") {
  SystemParams a;
  a.gfl.P_set = 2500.0;
  a.gfl.Q_set = -1000.0;
  SystemParams b = a;
  b.gfl.P_set *= 2.0;
  b.gfl.Q_set *= 2.0;
  const OperatingPoint oa = solve_operating_point(a), ob = solve_operating_point(b);
  auto frame = [](const OperatingPoint& op) {
    const double d = op.x[kGfmStates + 4];
    const cd rot = std::polar(1.0, -d);
    return std::make_pair(rot * cd(op.u[0], op.u[1]), rot * cd(op.x[kGfmStates], op.x[kGfmStates + 1]));
  };
  const auto [ua, ia] = frame(oa);
  const auto [ub, ib] = frame(ob);
  CHECK(std::abs(ua.imag()) < 1e-8 * std::abs(ua));
  CHECK(std::abs(ib - 2.0 * ia * ua.real() / ub.real()) < 1e-8 * std::abs(ib));
}

TEST_CASE("operating point: an impossible setpoint does not converge") {
  SystemParams p;
  p.gfl.P_set = 5e6;
  CHECK_THROWS_AS(solve_operating_point(p), Error);
}

TEST_CASE("linearization: automatic-differentiation Jacobian matches central differences") {
  for (double ac : {100.0, 70.0}) {
    SystemParams p;
    p.gfl.alpha_c = ac;
    const OperatingPoint op = solve_operating_point(p);
    const Eigen::MatrixXd A = build_system_model(p, op).A;
    CHECK(pu_relative_gap(p, finite_difference_jacobian(p, op.x), A) < 1e-5);
  }
}

TEST_CASE("GFM model: unloaded state matrix is Hurwitz and matches a finite-difference linearization") {
  SystemParams p;
  p.gfl.P_set = 0.0;
  p.gfl.Q_set = 0.0;
  const OperatingPoint op = solve_operating_point(p);
  const StateSpaceModel gfm = build_gfm_model(p, op);
  const Eigen::MatrixXd Au = vsm_unloaded_matrix(gfm);
  double max_re = 0.0;
  CHECK(is_hurwitz(Au, &max_re));
  CHECK(max_re < 0.0);

  // the current-driven device with zero current drawn is the unloaded converter
  const auto dev = make_gfm_device(p, op);
  const Eigen::VectorXd x0 = dev->initial_state();
  const double in[2] = {0.0, 0.0};
  Eigen::MatrixXd J(kGfmStates, kGfmStates);
  Eigen::VectorXd fp(kGfmStates), fm(kGfmStates);
  for (int j = 0; j < kGfmStates; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x0[j]));
    Eigen::VectorXd xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    dev->derivative(xp, in, fp);
    dev->derivative(xm, in, fm);
    J.col(j) = (fp - fm) / (2 * h);
  }
  auto sorted = [](Eigen::VectorXcd v) {
    std::vector<cd> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end(), [](cd a, cd b) { return a.imag() != b.imag() ? a.imag() < b.imag() : a.real() < b.real(); });
    return s;
  };
  const auto ea = sorted(eigenvalues(Au)), ef = sorted(eigenvalues(J));
  for (std::size_t k = 0; k < ea.size(); ++k) CHECK(std::abs(ea[k] - ef[k]) < 1e-4 * std::max(1.0, std::abs(ea[k])));
}

TEST_CASE("GFM model: without droop the frequency output ignores every state") {
  SystemParams p;
  p.gfm.m_p = 0.0;
  p.gfm.n_q = 0.0;
  const StateSpaceModel gfm = build_gfm_model(p, solve_operating_point(p));
  CHECK(gfm.C("omega").cwiseAbs().maxCoeff() == 0.0);
  CHECK(gfm.Dblock("u", "omega").cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("GFL model: PLL gain mapping gives a 1 Hz closed-loop bandwidth for 2 pi rad/s") {
  const double Vp = Nominal{}.V_peak();
  const PllGains g = pll_gains(2 * kPi, 0.707, Vp);
  auto H = [&](double f) {
    const cd s(0.0, 2 * kPi * f);
    return std::abs((g.k_p * s + g.k_i) * Vp / (s * s + g.k_p * Vp * s + g.k_i * Vp));
  };
  double lo = 1e-3, hi = 1e3;
  for (int i = 0; i < 200; ++i) {
    const double m = std::sqrt(lo * hi);
    (H(m) > 1.0 / std::sqrt(2.0) ? lo : hi) = m;
  }
  CHECK(std::abs(lo - 1.0) < 0.15);
}

TEST_CASE("GFL model: with the PLL frozen the frequency admittance is the frame-rotation term") {
  SystemParams p;
  const OperatingPoint op = solve_operating_point(p);
  SystemParams q = p;
  q.gfl.k_p_pll = 0.0;
  q.gfl.k_i_pll = 0.0;
  const StateSpaceModel m = build_gfl_model(q, op, false);
  // oracle: eliminate the angle (d delta/dt = -d omega) using finite differences of the nonlinear equations
  const GflGains k = gfl_gains(q);
  constexpr int n = kGflStates;
  Eigen::VectorXd x0 = op.x.tail(n);
  auto rhs = [&](const Eigen::VectorXd& x, double w) {
    Eigen::VectorXd dx(n);
    double i[2];
    gfl_eval<double>(q, k, x.data(), op.u.data(), w, q.gfl.P_set, q.gfl.Q_set, dx.data(), i);
    return std::make_pair(dx, Eigen::Vector2d(i[0], i[1]));
  };
  Eigen::MatrixXd J(n, n), Cj(2, n);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x0[j]));
    Eigen::VectorXd xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    const auto fp = rhs(xp, op.omega), fm = rhs(xm, op.omega);
    J.col(j) = (fp.first - fm.first) / (2 * h);
    Cj.col(j) = (fp.second - fm.second) / (2 * h);
  }
  const double hw = 1e-3;
  const Eigen::VectorXd bw = (rhs(x0, op.omega + hw).first - rhs(x0, op.omega - hw).first) / (2 * hw);
  // states without delta (index 4)
  const std::vector<int> keep{0, 1, 2, 3, 5};
  Eigen::MatrixXd Ar(5, 5), Cr(2, 5);
  Eigen::VectorXd ad(5), br(5);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) Ar(r, c) = J(keep[r], keep[c]);
    ad[r] = J(keep[r], 4);
    br[r] = bw[keep[r]];
  }
  for (int c = 0; c < 5; ++c) Cr.col(c) = Cj.col(keep[c]);
  for (double f : {0.05, 0.7, 6.0, 60.0, 600.0}) {
    const cd s(0.0, 2 * kPi * f);
    const Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(5, 5) - Ar.cast<cd>();
    const Eigen::VectorXcd rhs_vec = br.cast<cd>() - ad.cast<cd>() / s;
    const Eigen::Vector2cd psi_oracle = Cr.cast<cd>() * M.partialPivLu().solve(rhs_vec) - Cj.col(4).cast<cd>() / s;
    const Eigen::MatrixXcd psi = eval_response(m, "omega", "i", 2 * kPi * f);
    CHECK((psi - psi_oracle).norm() < 1e-5 * psi_oracle.norm());
  }
}

TEST_CASE("nonlinear model: passive RL branch never gains energy") {
  const double R = 0.4, L = 7e-3, w0 = 2 * kPi * 50;
  const auto dev = make_rl_device(R, L, w0);
  Eigen::VectorXd x(2);
  x << 12.0, -5.0;
  const double in[2] = {0.0, 0.0};
  double energy = 0.5 * L * x.squaredNorm();
  Eigen::VectorXd dx(2);
  for (int k = 0; k < 2000; ++k) {
    rk4_step([&](const Eigen::VectorXd& z) {
      dev->derivative(z, in, dx);
      return dx;
    }, x, 1e-4);
    const double e = 0.5 * L * x.squaredNorm();
    CHECK(e <= energy * (1 + 1e-15));
    energy = e;
  }
}

TEST_CASE("linear model predicts a 0.1% power-setpoint step within 5%") {
  for (const char* which : {"P", "Q"}) {
    SystemParams p;
    const OperatingPoint op = solve_operating_point(p);
    const StateSpaceModel sys = build_system_model(p, op);
    const double dP = std::string(which) == "P" ? 1e-3 * p.gfl.P_set : 0.0;
    const double dQ = std::string(which) == "Q" ? 1e-3 * p.gfl.Q_set : 0.0;

    Scenario sc;
    sc.params = p;
    sc.duration = 3.0;
    sc.record_dt = 1e-3;
    sc.change = ParameterOverride{std::string("gfl.") + which + "_set", p.gfl.P_set + dP, 0.0};
    if (dQ != 0.0) sc.change = ParameterOverride{"gfl.Q_set", p.gfl.Q_set + dQ, 0.0};
    const TimeSeries ts = simulate(sc);

    // exact discretization of the linear step response
    const Eigen::Index n = sys.n();
    Eigen::MatrixXd Aa = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Aa.topLeftCorner(n, n) = sys.A;
    Aa.block(0, n, n, 1) = sys.B("pq") * Eigen::Vector2d(dP, dQ);
    const Eigen::MatrixXd Phi = (Aa * ts.dt).exp();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n + 1);
    z[n] = 1.0;
    const Eigen::MatrixXd C = sys.C("i");
    const Eigen::MatrixXd D = sys.Dblock("pq", "i");
    double err = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const Eigen::Vector2d lin = C * z.head(n) + D * Eigen::Vector2d(dP, dQ);
      const Eigen::Vector2d nl(ts.channel("i_d")[k] - op.i[0], ts.channel("i_q")[k] - op.i[1]);
      if (k > 0) {
        err = std::max(err, (nl - lin).norm());
        peak = std::max(peak, lin.norm());
      }
      z = Phi * z;
    }
    CAPTURE(which);
    CHECK(err < 0.05 * peak);
  }
}
