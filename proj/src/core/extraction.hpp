#pragma once

#include <Eigen/Dense>
#include <vector>

#include "loci.hpp"
#include "state_space.hpp"

namespace freqstab {

enum class GammaMethod { kExactInversion, kVirtualResistor };

inline constexpr double kDefaultVirtualResistor = 1e4;

/// Z_V = -(C_i (jwI-A)^-1 B_u + D)^-1 : voltage at the PCC per unit current
/// drawn from the grid-forming side. 2x2, ohm.
TransferSamples vsm_impedance(const StateSpaceModel& gfm, const std::vector<double>& f_hz);

/// Gamma_V: droop-frequency response to current drawn at the PCC. 1x2, (rad/s)/A.
TransferSamples vsm_frequency_impedance(const StateSpaceModel& gfm, GammaMethod method,
                                        double R_v, const std::vector<double>& f_hz);

/// Grid-forming model loaded by R_v in parallel with a current sink "i".
/// Outputs "omega". Warns through `hurwitz` when the result is unstable.
StateSpaceModel virtual_resistor_model(const StateSpaceModel& gfm, double R_v, bool* hurwitz = nullptr);

/// State matrix of the grid-forming side with no current drawn at the PCC
/// (only its own load attached); its eigenvalues are the poles of Z_V and Gamma_V.
Eigen::MatrixXd vsm_unloaded_matrix(const StateSpaceModel& gfm);

/// Y_C: 2x2, S.
TransferSamples csm_admittance(const StateSpaceModel& gfl, const std::vector<double>& f_hz);
/// Psi_C: 2x1, A/(rad/s).
TransferSamples csm_frequency_admittance(const StateSpaceModel& gfl, const std::vector<double>& f_hz);

struct PointResponse {
  Eigen::Matrix2cd Zv;
  Eigen::RowVector2cd Gv;
  Eigen::Matrix2cd Yc;
  Eigen::Vector2cd Pc;
};

/// All four objects at one frequency (exact-inversion Gamma_V).
PointResponse extract_point(const StateSpaceModel& gfm, const StateSpaceModel& gfl, double f_hz);

/// Interconnects the two models at the PCC. Input pq; outputs i, u, omega.
StateSpaceModel assemble_system(const StateSpaceModel& gfm, const StateSpaceModel& gfl);

}  // namespace freqstab
