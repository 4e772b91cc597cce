#pragma once

#include <complex>
#include <string>
#include <vector>

#include "loci.hpp"
#include "timeseries.hpp"

namespace freqstab {

struct ComplexCurve {
  std::string label;
  std::vector<double> freq_hz;
  std::vector<std::complex<double>> values;
};

/// Magnitude (dB) and phase (deg) over log frequency (Hz).
std::string bode_svg(const std::vector<ComplexCurve>& curves, const std::string& title = "");

/// Re/Im plane; `unit_circle` adds the reference circle. The -1 point is marked when there is data.
std::string nyquist_svg(const std::vector<ComplexCurve>& curves, bool unit_circle = true,
                        const std::string& title = "");

struct EigenTraceEntry {
  std::string label;
  std::vector<std::complex<double>> eigenvalues;
};
/// Real part (1/s) against imaginary part in Hz, one marker colour per entry.
std::string eigtrace_svg(const std::vector<EigenTraceEntry>& entries, const std::string& title = "");

/// Stacked panels, one per channel (empty = all channels).
std::string timeseries_svg(const TimeSeries& ts, const std::vector<std::string>& channels = {},
                           const std::string& title = "");

/// Curves of both eigenvalue loci, labelled with `suffix`.
std::vector<ComplexCurve> loci_curves(const EigenLoci& loci, const std::string& suffix = "");

}  // namespace freqstab
