#include <doctest.h>

#include <cmath>

#include "converters.hpp"
#include "error.hpp"
#include "extraction.hpp"
#include "helpers.hpp"
#include "loci.hpp"
#include "stability.hpp"

using namespace freqstab;
using testing::cd;
using testing::kPi;

namespace {

/// lambda1 = k / (j w tau + 1)^3, lambda2 = 0.
EigenLoci triple_lag(double k, double tau) {
  EigenLoci l;
  l.freq_hz = log_grid(1e-3, 1e3, 200);
  for (double f : l.freq_hz) {
    const cd s(0.0, 2 * kPi * f);
    l.lambda1.push_back(k / std::pow(s * tau + 1.0, 3));
    l.lambda2.push_back(0.0);
  }
  return l;
}

TransferSamples constant_samples(const std::vector<double>& f, const Eigen::MatrixXcd& v) {
  TransferSamples s(static_cast<int>(v.rows()), static_cast<int>(v.cols()));
  for (double x : f) s.push_back(x, v);
  return s;
}

SystemParams with(const char* path, double v) {
  SystemParams p;
  set_param(p, path, v);
  return p;
}

}  // namespace

TEST_CASE("minor_loop: no coupling term makes both loops identical") {
  const SystemParams p;
  const OperatingPoint op = solve_operating_point(p);
  const auto gfm = build_gfm_model(p, op), gfl = build_gfl_model(p, op);
  const auto f = log_grid(0.1, 100, 10);
  const TransferSamples Zv = vsm_impedance(gfm, f), Yc = csm_admittance(gfl, f);
  const TransferSamples Gv = vsm_frequency_impedance(gfm, GammaMethod::kExactInversion, 1e4, f);
  const TransferSamples Pc = csm_frequency_admittance(gfl, f);
  const TransferSamples zeroP = constant_samples(f, Eigen::MatrixXcd::Zero(2, 1));
  const TransferSamples zeroG = constant_samples(f, Eigen::MatrixXcd::Zero(1, 2));
  for (const auto* pair : {&zeroP, &zeroG}) {
    const bool pz = pair == &zeroP;
    const TransferSamples e = minor_loop(Zv, pz ? Gv : zeroG, Yc, pz ? zeroP : Pc, true);
    const TransferSamples s = minor_loop(Zv, pz ? Gv : zeroG, Yc, pz ? zeroP : Pc, false);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK((e.values[k] - s.values[k]).norm() == 0.0);
  }
  // the coupling term is an outer product: rank one
  const TransferSamples e = minor_loop(Zv, Gv, Yc, Pc, true), s = minor_loop(Zv, Gv, Yc, Pc, false);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Eigen::MatrixXcd d = s.values[k] - e.values[k];
    CHECK(std::abs(d.determinant()) < 1e-12 * d.squaredNorm());
    CHECK((d - Pc.values[k] * Gv.values[k]).norm() < 1e-12 * d.norm());
  }
}

TEST_CASE("minor_loop: diagonal case gives products of the diagonal entries") {
  const std::vector<double> f{1.0, 2.0};
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(2, 2), Z = Eigen::MatrixXcd::Zero(2, 2);
  Y(0, 0) = cd(0.5, 0.1);
  Y(1, 1) = cd(-2.0, 0.3);
  Z(0, 0) = cd(1.5, -0.7);
  Z(1, 1) = cd(0.25, 4.0);
  const TransferSamples L = minor_loop(constant_samples(f, Z), constant_samples(f, Eigen::MatrixXcd::Zero(1, 2)),
                                       constant_samples(f, Y), constant_samples(f, Eigen::MatrixXcd::Zero(2, 1)), true);
  const EigenLoci l = loci_of(L);
  const cd a = Y(0, 0) * Z(0, 0), b = Y(1, 1) * Z(1, 1);
  const bool direct = std::abs(l.lambda1[0] - a) < 1e-14 && std::abs(l.lambda2[0] - b) < 1e-14;
  const bool swapped = std::abs(l.lambda1[0] - b) < 1e-14 && std::abs(l.lambda2[0] - a) < 1e-14;
  CHECK((direct || swapped));
}

TEST_CASE("minor_loop: mismatched grids are rejected") {
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2, 2);
  try {
    minor_loop(constant_samples({1, 2}, I), constant_samples({1, 2}, Eigen::MatrixXcd::Zero(1, 2)),
               constant_samples({1, 3}, I), constant_samples({1, 2}, Eigen::MatrixXcd::Zero(2, 1)), true);
    FAIL("expected grid-mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGridMismatch);
  }
}

TEST_CASE("gnc_verdict: loci inside the unit disc are stable") {
  EigenLoci l;
  for (int k = 0; k < 100; ++k) {
    const double f = 0.01 * std::pow(1.1, k);
    l.freq_hz.push_back(f);
    l.lambda1.push_back(0.9 * std::polar(1.0, 0.2 * k));
    l.lambda2.push_back(cd(0.3, -0.1));
  }
  const StabilityVerdict v = gnc_verdict(l);
  CHECK(v.stable);
  CHECK(v.encirclements == std::vector<int>{0, 0});
}

TEST_CASE("gnc_verdict: triple lag is stable below the critical gain 8 and unstable above") {
  const double tau = 0.05;
  const StabilityVerdict lo = gnc_verdict(triple_lag(7.0, tau));
  const StabilityVerdict hi = gnc_verdict(triple_lag(9.0, tau));
  CHECK(lo.stable);
  CHECK_FALSE(hi.stable);
  CHECK(hi.encirclements[0] == 2);
  CHECK(hi.critical_frequency_hz.has_value());
  CHECK(*hi.critical_frequency_hz == doctest::Approx(std::sqrt(3.0) / (2 * kPi * tau)).epsilon(1e-3));
}

TEST_CASE("gnc_verdict: a locus through the critical point is marginal") {
  CHECK_THROWS_AS(gnc_verdict(triple_lag(8.0, 0.05), Method::kGncExtended, 1e-3), Error);
}

TEST_CASE("bode_crossing_analysis: constant -90 degree phase has no crossing") {
  EigenLoci l;
  for (int k = 0; k < 50; ++k) {
    const double f = 0.1 * std::pow(1.2, k);
    l.freq_hz.push_back(f);
    l.lambda1.push_back(cd(0.0, -1.0 / f));
    l.lambda2.push_back(cd(0.0, -3.0 / f));
  }
  CHECK(bode_crossing_analysis(l).empty());
}

TEST_CASE("bode_crossing_analysis: triple lag at critical gain crosses at 0 dB and sqrt(3)/(2 pi tau)") {
  const double tau = 0.02;
  const auto xs = bode_crossing_analysis(triple_lag(8.0, tau));
  REQUIRE(xs.size() == 1);
  CHECK(xs[0].locus == 1);
  CHECK(xs[0].f_hz == doctest::Approx(std::sqrt(3.0) / (2 * kPi * tau)).epsilon(1e-4));
  CHECK(std::abs(xs[0].mag_db) < 1e-3);
}

TEST_CASE("eigen_verdict: block-diagonal stable blocks") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 4);
  A.topLeftCorner(2, 2) << -1, 5, -5, -1;
  A.bottomRightCorner(2, 2) << -3, 0, 0, -0.5;
  const EigenAnalysis e = eigen_verdict(A);
  CHECK(e.verdict.stable);
  CHECK(e.verdict.rhp_count == 0);
  CHECK(e.verdict.max_real == doctest::Approx(-0.5));
}

TEST_CASE("eigen_verdict: lowering the current-controller bandwidth moves exactly one pair across") {
  int prev = -1;
  for (double ac : {100.0, 90.0, 80.0, 70.0}) {
    const SystemParams p = with("gfl.alpha_c", ac);
    const auto sys = build_system_model(p, solve_operating_point(p));
    const EigenAnalysis e = eigen_verdict(sys.A);
    CAPTURE(ac);
    if (ac >= 80.0) CHECK(e.verdict.rhp_count == 0);
    if (ac == 70.0) {
      CHECK(e.verdict.rhp_count == 2);
      CHECK(prev == 0);
    }
    prev = e.verdict.rhp_count;
  }
}

TEST_CASE("eigen_verdict: dominant pair frequency agrees with the phase sweep of det(jwI - A)") {
  const SystemParams p = with("gfl.alpha_c", 70.0);
  const auto sys = build_system_model(p, solve_operating_point(p));
  const EigenAnalysis e = eigen_verdict(sys.A);
  REQUIRE(e.verdict.critical_frequency_hz.has_value());
  const GridSpec g;
  const auto f = log_grid(g.f_min, g.f_max, g.points_per_decade);
  double best = 0.0, f_best = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Eigen::MatrixXcd M = cd(0.0, 2 * kPi * f[k]) * Eigen::MatrixXcd::Identity(sys.n(), sys.n()) - sys.A.cast<cd>();
    const double ph = std::arg(M.partialPivLu().determinant());
    if (k > 0) {
      const double rate = std::abs(std::remainder(ph - prev, 2 * kPi)) / std::log(f[k] / f[k - 1]);
      if (rate > best) {
        best = rate;
        f_best = std::sqrt(f[k] * f[k - 1]);
      }
    }
    prev = ph;
  }
  const double ratio = std::pow(10.0, 1.0 / g.points_per_decade);
  const double r = std::max(f_best, *e.verdict.critical_frequency_hz) / std::min(f_best, *e.verdict.critical_frequency_hz);
  CHECK(r <= ratio);
}

TEST_CASE("analyze_configuration: determinant identity holds on the refined grid") {
  for (double ac : {100.0, 70.0}) {
    const ConfigAnalysis a = analyze_configuration(with("gfl.alpha_c", ac));
    CHECK(a.det_identity_error < 1e-9);
    CHECK(a.L_ext.size() >= a.base_points);
  }
}

TEST_CASE("analyze_configuration: forcing the coupling term to zero reproduces the standard verdicts") {
  AnalysisOptions opt;
  opt.zero_frequency_coupling = true;
  for (double ap : {2 * kPi, 4 * kPi, 8 * kPi}) {
    const ConfigAnalysis a = analyze_configuration(with("gfl.alpha_pll", ap), opt);
    CHECK(a.gnc_ext.stable == a.gnc_std.stable);
    CHECK(a.gnc_ext.encirclements == a.gnc_std.encirclements);
  }
}

TEST_CASE("analyze_configuration: frequency coupling changes the verdict for a tuned PLL case") {
  // PLL bandwidth 2 Hz: the standard loop encircles -1, the extended loop does not
  const ConfigAnalysis a = analyze_configuration(with("gfl.alpha_pll", 4 * kPi));
  CHECK(a.gnc_ext.stable);
  CHECK(a.eig.stable);
  CHECK_FALSE(a.gnc_std.stable);
}

TEST_CASE("analyze_configuration: unstable case has a crossing above 0 dB near the eigenvalue frequency") {
  const ConfigAnalysis a = analyze_configuration(with("gfl.alpha_c", 70.0));
  CHECK_FALSE(a.gnc_ext.stable);
  REQUIRE(a.gnc_ext.critical_frequency_hz.has_value());
  bool found = false;
  for (const auto& c : a.crossings_ext) {
    if (std::abs(c.f_hz - *a.gnc_ext.critical_frequency_hz) < 1e-12) {
      found = true;
      CHECK(c.mag_db > 0.0);
    }
  }
  CHECK(found);
  CHECK(*a.gnc_ext.critical_frequency_hz == doctest::Approx(*a.eig.critical_frequency_hz).epsilon(0.05));
}

TEST_CASE("gnc_verdict: unstable critical frequency comes from the encircling locus") {
  // two crossings: 1 Hz beyond -1 on the encircling locus, 30 Hz just inside -1 on the other
  EigenLoci l;
  for (int k = 0; k <= 400; ++k) {
    const double f = 0.01 * std::pow(10.0, k / 100.0);
    const cd s(0.0, 2 * kPi * f);
    l.freq_hz.push_back(f);
    const double t1 = std::sqrt(3.0) / (2 * kPi * 1.0), t2 = std::sqrt(3.0) / (2 * kPi * 30.0);
    l.lambda1.push_back(9.0 / std::pow(1.0 + s * t1, 3));
    l.lambda2.push_back(7.9 / std::pow(1.0 + s * t2, 3));
  }
  const StabilityVerdict v = gnc_verdict(l);
  CHECK_FALSE(v.stable);
  CHECK(v.encirclements == std::vector<int>{2, 0});
  REQUIRE(v.critical_frequency_hz.has_value());
  CHECK(*v.critical_frequency_hz == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("analyze_configuration: unstable PLL case reports the low-frequency crossing") {
  const ConfigAnalysis a = analyze_configuration(with("gfl.alpha_pll", 6 * kPi));
  CHECK_FALSE(a.gnc_ext.stable);
  REQUIRE(a.gnc_ext.critical_frequency_hz.has_value());
  CHECK(*a.gnc_ext.critical_frequency_hz < 2.0);
  CHECK(*a.gnc_ext.critical_frequency_hz == doctest::Approx(*a.eig.critical_frequency_hz).epsilon(0.05));
}

TEST_CASE("equivalence_report: 20-point current-controller sweep agrees everywhere") {
  std::vector<ConfigAnalysis> runs;
  for (int k = 0; k < 20; ++k) runs.push_back(analyze_configuration(with("gfl.alpha_c", 100.0 - 30.0 * k / 19.0)));
  const GridSpec g;
  const EquivalenceReport r = equivalence_report(runs, g);
  CHECK(r.compared + r.excluded == 20);
  CHECK(r.all_agree());
  for (const auto& row : r.rows) {
    if (row.marginal || row.eig_stable) continue;
    CAPTURE(row.label);
    REQUIRE(row.f_ratio.has_value());
    CHECK(*row.f_ratio <= r.grid_ratio);
  }
}

TEST_CASE("equivalence_report: marginal configurations are listed but not compared") {
  std::vector<ConfigAnalysis> runs{analyze_configuration(SystemParams{}), analyze_configuration(with("gfl.alpha_c", 70.0))};
  runs[1].gnc_ext.marginal = true;
  runs[1].gnc_ext.stable = !runs[1].eig.stable;
  const EquivalenceReport r = equivalence_report(runs, GridSpec{});
  CHECK(r.rows.size() == 2);
  CHECK(r.compared == 1);
  CHECK(r.excluded == 1);
  CHECK(r.all_agree());
  CHECK(r.rows[1].marginal);
}
