#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "converters.hpp"
#include "extraction.hpp"
#include "loci.hpp"
#include "params.hpp"

namespace freqstab {

enum class Method { kGncExtended, kGncStandard, kEigenvalue };
const char* to_string(Method m);

struct StabilityVerdict {
  Method method = Method::kGncExtended;
  bool stable = false;
  bool marginal = false;            // verdict withheld / near the boundary
  std::vector<int> encirclements;   // clockwise, per locus (GNC)
  int rhp_count = 0;                // eigenvalues with Re >= 0
  std::optional<double> critical_frequency_hz;
  std::optional<double> gain_margin_db;
  std::optional<double> phase_margin_deg;
  double min_distance = 0.0;        // nearest approach of a locus to -1 (GNC)
  double max_real = 0.0;            // dominant eigenvalue real part
  std::vector<std::string> warnings;
};

/// L = Yc Zv - Psi Gamma (extended) or Yc Zv (standard).
TransferSamples minor_loop(const TransferSamples& Zv, const TransferSamples& Gv, const TransferSamples& Yc,
                           const TransferSamples& Pc, bool include_frequency_dynamics);

struct BodeCrossing {
  int locus = 0;  // 1 or 2
  double f_hz = 0.0;
  double mag_db = 0.0;
};

/// Points where a locus crosses the negative real axis (phase -180 deg),
/// interpolated in log-frequency.
std::vector<BodeCrossing> bode_crossing_analysis(const EigenLoci& loci);

/// Throws kMarginalCase when a locus passes within eps of -1. Critical frequency:
/// when unstable, the crossing beyond -1 closest to 0 dB on an encircling locus;
/// otherwise the crossing closest to 0 dB.
StabilityVerdict gnc_verdict(const EigenLoci& loci, Method method = Method::kGncExtended, double eps = 1e-3);

struct EigenAnalysis {
  StabilityVerdict verdict;
  Eigen::VectorXcd eigenvalues;
};
EigenAnalysis eigen_verdict(const Eigen::MatrixXd& A, double marginal_ratio = 1e-4);

struct AnalysisOptions {
  GridSpec grid;
  bool refine = true;
  int max_refine_passes = 8;
  double eps = 1e-3;
  bool zero_frequency_coupling = false;  // force Psi Gamma = 0
  bool check_open_loop = true;
};

struct ConfigAnalysis {
  std::string label;
  SystemParams params;
  OperatingPoint op;
  StateSpaceModel gfm, gfl, sys;
  TransferSamples Zv, Gv, Yc, Pc;
  TransferSamples L_ext, L_std;
  EigenLoci loci_ext, loci_std;
  StabilityVerdict gnc_ext, gnc_std, eig;
  Eigen::VectorXcd eigenvalues;
  std::vector<BodeCrossing> crossings_ext, crossings_std;
  double det_identity_error = 0.0;  // max relative |det(I+L) - (1+l1)(1+l2)|
  std::size_t base_points = 0;
};

/// Operating point, models, loops on an adaptively refined grid and all verdicts.
ConfigAnalysis analyze_configuration(const SystemParams& p, const AnalysisOptions& opt = {},
                                     const std::string& label = "base");

/// Evaluates the minor loop on `f_hz` and refines where a locus crosses -180 deg
/// or comes near -1. Returns the final grid.
std::vector<double> refine_grid(const StateSpaceModel& gfm, const StateSpaceModel& gfl,
                                const std::vector<double>& f_hz, const AnalysisOptions& opt);

double det_identity_error(const TransferSamples& L, const EigenLoci& loci);

struct EquivalenceRow {
  std::string label;
  bool gnc_stable = false;
  bool eig_stable = false;
  bool marginal = false;
  bool agree = false;
  std::optional<double> f_gnc_hz;
  std::optional<double> f_eig_hz;
  std::optional<double> f_ratio;        // max/min of the two critical frequencies
  bool frequency_within_tolerance = true;
  double min_distance = 0.0;
  double max_real = 0.0;
};

struct EquivalenceReport {
  std::vector<EquivalenceRow> rows;
  std::size_t compared = 0;
  std::size_t agreed = 0;
  std::size_t excluded = 0;
  double grid_ratio = 1.0;  // ratio of adjacent base grid frequencies
  bool all_agree() const { return agreed == compared; }
};

/// Frequencies are compared for unstable configurations only, within two base
/// grid intervals.
EquivalenceReport equivalence_report(const std::vector<ConfigAnalysis>& runs, const GridSpec& grid);

nlohmann::json verdict_to_json(const StabilityVerdict& v);
nlohmann::json analysis_to_json(const ConfigAnalysis& a);
nlohmann::json report_to_json(const EquivalenceReport& r);
std::string report_to_text(const EquivalenceReport& r);

}  // namespace freqstab
