#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace freqstab {

using cd = std::complex<double>;

/// Complex responses sampled on a frequency grid. Frequencies are stored in Hz.
struct TransferSamples {
  int rows = 0;
  int cols = 0;
  std::vector<double> freq_hz;
  std::vector<Eigen::MatrixXcd> values;
  std::vector<std::string> warnings;

  TransferSamples() = default;
  TransferSamples(int r, int c) : rows(r), cols(c) {}

  std::size_t size() const { return freq_hz.size(); }
  double omega(std::size_t k) const;
  void push_back(double f_hz, Eigen::MatrixXcd value);
  /// Throws on non-increasing or non-positive grid, shape or finiteness violations.
  void validate() const;
};

struct EigenLoci {
  std::vector<double> freq_hz;
  std::vector<cd> lambda1;
  std::vector<cd> lambda2;

  std::size_t size() const { return freq_hz.size(); }
};

/// Both eigenvalues of a 2x2 complex matrix.
std::pair<cd, cd> eigen2(const Eigen::Matrix2cd& M);

/// Nearest-neighbour continuity ordering of per-frequency eigenvalue pairs.
EigenLoci sort_loci(const std::vector<double>& freq_hz, const std::vector<std::pair<cd, cd>>& raw);

EigenLoci loci_of(const TransferSamples& L);

/// Counter-clockwise winding of the closed polyline (last point joins the first)
/// about `about`. Throws kPointOnCurve if the curve comes within eps.
int winding_number(const std::vector<cd>& curve, cd about, double eps = 1e-3);

/// Smallest distance from `p` to the closed polyline.
double distance_to_curve(const std::vector<cd>& curve, cd p);

/// Closed contour of a positive-frequency locus: conjugate branch from the
/// high-frequency end down to the lowest frequency, then the locus itself.
std::vector<cd> mirror_locus(const std::vector<cd>& locus);

/// Log-spaced grid in Hz containing both endpoints.
std::vector<double> log_grid(double f_min, double f_max, double points_per_decade);

}  // namespace freqstab
