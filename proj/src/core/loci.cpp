#include "loci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "error.hpp"

namespace freqstab {

double TransferSamples::omega(std::size_t k) const { return 2.0 * std::numbers::pi * freq_hz.at(k); }

void TransferSamples::push_back(double f_hz, Eigen::MatrixXcd value) {
  freq_hz.push_back(f_hz);
  values.push_back(std::move(value));
}

void TransferSamples::validate() const {
  if (values.size() != freq_hz.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample count differs from grid length");
  }
  for (std::size_t k = 0; k < freq_hz.size(); ++k) {
    if (!(freq_hz[k] > 0.0) || !std::isfinite(freq_hz[k])) {
      throw Error(ErrorCode::kInvalidArgument, "grid frequencies must be finite and positive");
    }
    if (k > 0 && !(freq_hz[k] > freq_hz[k - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "grid must be strictly increasing");
    }
    if (values[k].rows() != rows || values[k].cols() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "sample shape differs from declared shape");
    }
    if (!values[k].allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite response sample");
  }
}

std::pair<cd, cd> eigen2(const Eigen::Matrix2cd& M) {
  const cd a = M(0, 0), b = M(0, 1), c = M(1, 0), d = M(1, 1);
  const cd tr = a + d;
  const cd det = a * d - b * c;
  const cd amd = a - d;
  const cd disc = std::sqrt(amd * amd + 4.0 * b * c);
  // q-form: pick the sign that avoids cancellation in tr +- disc
  const cd s = (std::real(std::conj(tr) * disc) >= 0.0) ? tr + disc : tr - disc;
  const cd q = 0.5 * s;
  if (q == cd(0.0, 0.0)) return {cd(0.0, 0.0), cd(0.0, 0.0)};
  return {q, det / q};
}

EigenLoci sort_loci(const std::vector<double>& freq_hz, const std::vector<std::pair<cd, cd>>& raw) {
  if (raw.empty() || raw.size() != freq_hz.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "loci need one eigenvalue pair per grid point");
  }
  EigenLoci out;
  out.freq_hz = freq_hz;
  out.lambda1.reserve(raw.size());
  out.lambda2.reserve(raw.size());
  out.lambda1.push_back(raw[0].first);
  out.lambda2.push_back(raw[0].second);
  for (std::size_t k = 1; k < raw.size(); ++k) {
    const cd p1 = out.lambda1.back(), p2 = out.lambda2.back();
    const auto [a, b] = raw[k];
    const double keep = std::abs(p1 - a) + std::abs(p2 - b);
    const double swap = std::abs(p1 - b) + std::abs(p2 - a);
    if (swap < keep) {
      out.lambda1.push_back(b);
      out.lambda2.push_back(a);
    } else {
      out.lambda1.push_back(a);
      out.lambda2.push_back(b);
    }
  }
  return out;
}

EigenLoci loci_of(const TransferSamples& L) {
  if (L.rows != 2 || L.cols != 2) throw Error(ErrorCode::kDimensionMismatch, "loci need 2x2 samples");
  std::vector<std::pair<cd, cd>> raw;
  raw.reserve(L.size());
  for (const auto& m : L.values) raw.push_back(eigen2(m));
  return sort_loci(L.freq_hz, raw);
}

namespace {

double segment_distance(cd a, cd b, cd p) {
  const cd ab = b - a;
  const double len2 = std::norm(ab);
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(std::real((p - a) * std::conj(ab)) / len2, 0.0, 1.0);
  return std::abs(a + t * ab - p);
}

}  // namespace

double distance_to_curve(const std::vector<cd>& curve, cd p) {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = curve.size();
  for (std::size_t k = 0; k < n; ++k) d = std::min(d, segment_distance(curve[k], curve[(k + 1) % n], p));
  return d;
}

int winding_number(const std::vector<cd>& curve, cd about, double eps) {
  if (curve.empty()) throw Error(ErrorCode::kInvalidArgument, "empty curve");
  if (distance_to_curve(curve, about) < eps) {
    throw Error(ErrorCode::kPointOnCurve, "curve passes within tolerance of the point");
  }
  const std::size_t n = curve.size();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const cd a = curve[k] - about;
    const cd b = curve[(k + 1) % n] - about;
    total += std::arg(b / a);
  }
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

std::vector<cd> mirror_locus(const std::vector<cd>& locus) {
  std::vector<cd> out;
  out.reserve(2 * locus.size());
  for (auto it = locus.rbegin(); it != locus.rend(); ++it) out.push_back(std::conj(*it));
  out.insert(out.end(), locus.begin(), locus.end());
  return out;
}

std::vector<double> log_grid(double f_min, double f_max, double points_per_decade) {
  if (!(f_min > 0.0) || !(f_max > f_min) || !(points_per_decade > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid frequency grid specification");
  }
  const double decades = std::log10(f_max / f_min);
  const auto n = static_cast<std::size_t>(std::ceil(decades * points_per_decade - 1e-9));
  std::vector<double> f(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    f[k] = f_min * std::pow(10.0, decades * static_cast<double>(k) / static_cast<double>(n));
  }
  f.back() = f_max;
  return f;
}

}  // namespace freqstab
