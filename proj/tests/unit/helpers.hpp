#pragma once

#include <Eigen/Dense>
#include <complex>
#include <numbers>

#include "identification.hpp"
#include "state_space.hpp"

namespace testing {

using cd = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;

/// dq impedance of a series RL branch in a frame rotating at w0.
inline Eigen::Matrix2cd rl_impedance(double R, double L, double w0, double w) {
  Eigen::Matrix2cd Z;
  Z << cd(R, w * L), -w0 * L, w0 * L, cd(R, w * L);
  return Z;
}

/// Steady state of a device under constant input: Newton with a central-difference Jacobian.
inline Eigen::VectorXd device_steady_state(const freqstab::Device& d, const std::vector<double>& in,
                                           Eigen::VectorXd x) {
  const Eigen::Index n = x.size();
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd f(n), fp(n), fm(n);
    d.derivative(x, in.data(), f);
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      d.derivative(xp, in.data(), fp);
      d.derivative(xm, in.data(), fm);
      J.col(j) = (fp - fm) / (2.0 * h);
    }
    const Eigen::VectorXd dx = J.fullPivLu().solve(-f);
    x += dx;
    if (dx.norm() < 1e-12 * std::max(1.0, x.norm())) break;
  }
  return x;
}

/// Steady-state output sensitivity d(y)/d(in[j]) by central differences.
inline Eigen::MatrixXd quasi_static_gain(const freqstab::Device& d, const std::vector<double>& in0, double h) {
  const Eigen::VectorXd x0 = d.initial_state();
  Eigen::MatrixXd S(d.outputs(), static_cast<Eigen::Index>(in0.size()));
  std::vector<double> y(static_cast<std::size_t>(d.outputs())), yp(y), ym(y);
  for (std::size_t j = 0; j < in0.size(); ++j) {
    auto ip = in0, im = in0;
    ip[j] += h;
    im[j] -= h;
    d.output(device_steady_state(d, ip, x0), ip.data(), yp.data());
    d.output(device_steady_state(d, im, x0), im.data(), ym.data());
    for (int r = 0; r < d.outputs(); ++r) S(r, static_cast<Eigen::Index>(j)) = (yp[r] - ym[r]) / (2.0 * h);
  }
  return S;
}

}  // namespace testing
