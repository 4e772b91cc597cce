#include "stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace freqstab {

const char* to_string(Method m) {
  switch (m) {
    case Method::kGncExtended: return "gnc-extended";
    case Method::kGncStandard: return "gnc-standard";
    case Method::kEigenvalue: return "eigenvalue";
  }
  return "unknown";
}

namespace {

void require_same_grid(const TransferSamples& a, const TransferSamples& b) {
  if (a.freq_hz != b.freq_hz) throw Error(ErrorCode::kGridMismatch, "samples are on different grids");
}

double to_db(double mag) { return 20.0 * std::log10(mag); }

Eigen::Matrix2cd loop_at(const PointResponse& r, bool extended) {
  Eigen::Matrix2cd L = r.Yc * r.Zv;
  if (extended) L -= r.Pc * r.Gv;
  return L;
}

const std::vector<cd>& locus(const EigenLoci& l, int i) { return i == 1 ? l.lambda1 : l.lambda2; }

struct UnitCrossing {
  int locus;
  double f_hz;
  double phase_margin_deg;
};

std::vector<UnitCrossing> unit_crossings(const EigenLoci& loci) {
  std::vector<UnitCrossing> out;
  for (int i = 1; i <= 2; ++i) {
    const auto& v = locus(loci, i);
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double ma = std::abs(v[k]) - 1.0, mb = std::abs(v[k + 1]) - 1.0;
      if ((ma >= 0.0) == (mb >= 0.0)) continue;
      const double t = ma / (ma - mb);
      const cd z = v[k] + t * (v[k + 1] - v[k]);
      const double f = std::exp(std::log(loci.freq_hz[k]) + t * std::log(loci.freq_hz[k + 1] / loci.freq_hz[k]));
      out.push_back({i, f, 180.0 - std::abs(std::arg(z)) * 180.0 / std::numbers::pi});
    }
  }
  return out;
}

std::optional<BodeCrossing> dominant(const std::vector<BodeCrossing>& xs, int only_locus = 0) {
  std::optional<BodeCrossing> best;
  for (const auto& c : xs) {
    if (only_locus && c.locus != only_locus) continue;
    if (!best || std::abs(c.mag_db) < std::abs(best->mag_db)) best = c;
  }
  return best;
}

}  // namespace

TransferSamples minor_loop(const TransferSamples& Zv, const TransferSamples& Gv, const TransferSamples& Yc,
                           const TransferSamples& Pc, bool include_frequency_dynamics) {
  require_same_grid(Zv, Gv);
  require_same_grid(Zv, Yc);
  require_same_grid(Zv, Pc);
  if (Zv.rows != 2 || Zv.cols != 2 || Yc.rows != 2 || Yc.cols != 2 || Gv.rows != 1 || Gv.cols != 2 ||
      Pc.rows != 2 || Pc.cols != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "minor loop needs 2x2, 1x2, 2x2, 2x1 samples");
  }
  TransferSamples L(2, 2);
  for (std::size_t k = 0; k < Zv.size(); ++k) {
    Eigen::MatrixXcd m = Yc.values[k] * Zv.values[k];
    if (include_frequency_dynamics) m -= Pc.values[k] * Gv.values[k];
    L.push_back(Zv.freq_hz[k], std::move(m));
  }
  return L;
}

std::vector<BodeCrossing> bode_crossing_analysis(const EigenLoci& loci) {
  std::vector<BodeCrossing> out;
  for (int i = 1; i <= 2; ++i) {
    const auto& v = locus(loci, i);
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const cd a = v[k], b = v[k + 1];
      if ((a.imag() >= 0.0) == (b.imag() >= 0.0)) continue;
      const double t = a.imag() / (a.imag() - b.imag());
      const double re = a.real() + t * (b.real() - a.real());
      if (!(re < 0.0)) continue;
      const double f = std::exp(std::log(loci.freq_hz[k]) + t * std::log(loci.freq_hz[k + 1] / loci.freq_hz[k]));
      out.push_back({i, f, to_db(-re)});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.locus != y.locus ? x.locus < y.locus : x.f_hz < y.f_hz;
  });
  return out;
}

StabilityVerdict gnc_verdict(const EigenLoci& loci, Method method, double eps) {
  if (loci.size() == 0) throw Error(ErrorCode::kEmptyDataset, "no loci");
  StabilityVerdict v;
  v.method = method;
  const cd minus_one(-1.0, 0.0);
  double d[2];
  std::vector<cd> closed[2];
  for (int i = 0; i < 2; ++i) {
    closed[i] = mirror_locus(locus(loci, i + 1));
    d[i] = distance_to_curve(closed[i], minus_one);
  }
  v.min_distance = std::min(d[0], d[1]);
  if (v.min_distance < eps) {
    throw Error(ErrorCode::kMarginalCase, "a locus passes within " + std::to_string(eps) +
                                              " of -1; verdict withheld, refine the grid");
  }
  int total = 0;
  for (int i = 0; i < 2; ++i) {
    const int n = -winding_number(closed[i], minus_one, eps);
    v.encirclements.push_back(n);
    total += n;
  }
  v.stable = total == 0;

  const double tail = std::max(std::abs(loci.lambda1.back()), std::abs(loci.lambda2.back()));
  if (tail >= 0.05) {
    v.warnings.push_back("loop magnitude at the highest frequency is " + std::to_string(tail) +
                         " (>= 0.05); contour closure may be inaccurate");
  }

  const auto xs = bode_crossing_analysis(loci);
  std::optional<BodeCrossing> crit;
  if (!v.stable) {
    // crossings beyond -1 on a locus that encircles it
    for (const auto& c : xs) {
      if (c.mag_db <= 0.0 || v.encirclements[static_cast<std::size_t>(c.locus - 1)] == 0) continue;
      if (!crit || c.mag_db < crit->mag_db) crit = c;
    }
  }
  if (!crit) crit = dominant(xs);
  if (crit) v.critical_frequency_hz = crit->f_hz;
  const int nearest = d[0] <= d[1] ? 1 : 2;
  if (auto c = dominant(xs, nearest)) v.gain_margin_db = -c->mag_db;
  for (const auto& u : unit_crossings(loci)) {
    if (u.locus != nearest) continue;
    if (!v.phase_margin_deg || u.phase_margin_deg < *v.phase_margin_deg) v.phase_margin_deg = u.phase_margin_deg;
  }
  return v;
}

EigenAnalysis eigen_verdict(const Eigen::MatrixXd& A, double marginal_ratio) {
  EigenAnalysis out;
  out.eigenvalues = eigenvalues(A);
  auto& v = out.verdict;
  v.method = Method::kEigenvalue;
  v.max_real = -std::numeric_limits<double>::infinity();
  cd dom(0.0, 0.0);
  std::optional<cd> pair;
  for (const auto& l : out.eigenvalues) {
    if (l.real() >= 0.0) ++v.rhp_count;
    if (l.real() > v.max_real) {
      v.max_real = l.real();
      dom = l;
    }
    if (l.imag() > 1e-9 * std::abs(l) && (!pair || l.real() > pair->real())) pair = l;
  }
  v.stable = v.rhp_count == 0;
  if (out.eigenvalues.size() > 0 && std::abs(dom.real()) <= marginal_ratio * std::abs(dom)) v.marginal = true;
  if (pair) v.critical_frequency_hz = pair->imag() / (2.0 * std::numbers::pi);
  return out;
}

double det_identity_error(const TransferSamples& L, const EigenLoci& loci) {
  double worst = 0.0;
  for (std::size_t k = 0; k < L.size(); ++k) {
    const Eigen::Matrix2cd M = Eigen::Matrix2cd::Identity() + Eigen::Matrix2cd(L.values[k]);
    const cd det = M.determinant();
    const cd prod = (1.0 + loci.lambda1[k]) * (1.0 + loci.lambda2[k]);
    const double scale = std::max({std::abs(det), std::abs(prod), 1e-300});
    worst = std::max(worst, std::abs(det - prod) / scale);
  }
  return worst;
}

std::vector<double> refine_grid(const StateSpaceModel& gfm, const StateSpaceModel& gfl,
                                const std::vector<double>& f_hz, const AnalysisOptions& opt) {
  std::map<double, std::pair<Eigen::Matrix2cd, Eigen::Matrix2cd>> cache;
  auto eval = [&](double f) {
    if (cache.count(f)) return;
    PointResponse r = extract_point(gfm, gfl, f);
    if (opt.zero_frequency_coupling) r.Pc.setZero();
    cache[f] = {loop_at(r, true), loop_at(r, false)};
  };
  for (double f : f_hz) eval(f);
  if (!opt.refine) return f_hz;
  for (int pass = 0; pass < opt.max_refine_passes; ++pass) {
    std::vector<double> grid;
    grid.reserve(cache.size());
    for (const auto& [f, v] : cache) grid.push_back(f);
    std::vector<bool> flag(grid.size(), false);
    for (int which = 0; which < 2; ++which) {
      std::vector<std::pair<cd, cd>> raw;
      raw.reserve(grid.size());
      for (double f : grid) {
        const auto& m = which == 0 ? cache[f].first : cache[f].second;
        raw.push_back(eigen2(m));
      }
      const EigenLoci l = sort_loci(grid, raw);
      for (int i = 1; i <= 2; ++i) {
        const auto& v = locus(l, i);
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
          const cd a = v[k], b = v[k + 1];
          const double da = std::abs(1.0 + a), db = std::abs(1.0 + b);
          const bool crosses = (a.imag() >= 0.0) != (b.imag() >= 0.0) && a.real() + b.real() < 0.0;
          const bool near = std::min(da, db) < 0.2;
          if ((crosses || near) && std::abs(a - b) > std::max(1e-3, 0.1 * std::min(da, db))) flag[k] = true;
        }
      }
    }
    bool any = false;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      if (!flag[k]) continue;
      const double mid = std::sqrt(grid[k] * grid[k + 1]);
      if (!(mid > grid[k] && mid < grid[k + 1])) continue;
      eval(mid);
      any = true;
    }
    if (!any) break;
  }
  std::vector<double> out;
  out.reserve(cache.size());
  for (const auto& [f, v] : cache) out.push_back(f);
  return out;
}

ConfigAnalysis analyze_configuration(const SystemParams& p, const AnalysisOptions& opt, const std::string& label) {
  ConfigAnalysis a;
  a.label = label;
  a.params = p;
  a.op = solve_operating_point(p);
  a.gfm = build_gfm_model(p, a.op);
  a.gfl = build_gfl_model(p, a.op);
  a.sys = assemble_system(a.gfm, a.gfl);
  if (opt.check_open_loop) {
    double mv = 0.0, mc = 0.0;
    const bool sv = is_hurwitz(vsm_unloaded_matrix(a.gfm), &mv);
    const bool sc = is_hurwitz(a.gfl.A, &mc);
    if (!sv || !sc) {
      throw Error(ErrorCode::kOpenLoopUnstable,
                  std::string("standalone ") + (!sv ? "grid-forming" : "grid-following") +
                      " model has right-half-plane poles; the Nyquist test needs stable subsystems");
    }
  }
  auto eig = eigen_verdict(a.sys.A);
  a.eig = eig.verdict;
  a.eigenvalues = eig.eigenvalues;

  const auto base = log_grid(opt.grid.f_min, opt.grid.f_max, opt.grid.points_per_decade);
  a.base_points = base.size();
  const auto grid = refine_grid(a.gfm, a.gfl, base, opt);
  a.Zv = TransferSamples(2, 2);
  a.Gv = TransferSamples(1, 2);
  a.Yc = TransferSamples(2, 2);
  a.Pc = TransferSamples(2, 1);
  for (double f : grid) {
    PointResponse r = extract_point(a.gfm, a.gfl, f);
    if (opt.zero_frequency_coupling) r.Pc.setZero();
    a.Zv.push_back(f, r.Zv);
    a.Gv.push_back(f, r.Gv);
    a.Yc.push_back(f, r.Yc);
    a.Pc.push_back(f, r.Pc);
  }
  a.L_ext = minor_loop(a.Zv, a.Gv, a.Yc, a.Pc, true);
  a.L_std = minor_loop(a.Zv, a.Gv, a.Yc, a.Pc, false);
  a.loci_ext = loci_of(a.L_ext);
  a.loci_std = loci_of(a.L_std);
  a.crossings_ext = bode_crossing_analysis(a.loci_ext);
  a.crossings_std = bode_crossing_analysis(a.loci_std);
  a.det_identity_error = std::max(det_identity_error(a.L_ext, a.loci_ext), det_identity_error(a.L_std, a.loci_std));

  auto gnc = [&](const EigenLoci& l, Method m) {
    try {
      return gnc_verdict(l, m, opt.eps);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMarginalCase) throw;
      StabilityVerdict v;
      v.method = m;
      v.marginal = true;
      v.min_distance = std::min(distance_to_curve(mirror_locus(l.lambda1), {-1.0, 0.0}),
                                distance_to_curve(mirror_locus(l.lambda2), {-1.0, 0.0}));
      v.warnings.push_back(e.what());
      return v;
    }
  };
  a.gnc_ext = gnc(a.loci_ext, Method::kGncExtended);
  a.gnc_std = gnc(a.loci_std, Method::kGncStandard);
  return a;
}

EquivalenceReport equivalence_report(const std::vector<ConfigAnalysis>& runs, const GridSpec& grid) {
  EquivalenceReport r;
  r.grid_ratio = std::pow(10.0, 1.0 / grid.points_per_decade);
  const double tol = r.grid_ratio * r.grid_ratio * (1.0 + 1e-12);
  for (const auto& a : runs) {
    EquivalenceRow row;
    row.label = a.label;
    row.gnc_stable = a.gnc_ext.stable;
    row.eig_stable = a.eig.stable;
    row.marginal = a.gnc_ext.marginal || a.eig.marginal;
    row.agree = !row.marginal && row.gnc_stable == row.eig_stable;
    row.f_gnc_hz = a.gnc_ext.critical_frequency_hz;
    row.f_eig_hz = a.eig.critical_frequency_hz;
    row.min_distance = a.gnc_ext.min_distance;
    row.max_real = a.eig.max_real;
    if (row.f_gnc_hz && row.f_eig_hz) {
      row.f_ratio = std::max(*row.f_gnc_hz, *row.f_eig_hz) / std::min(*row.f_gnc_hz, *row.f_eig_hz);
    }
    if (!row.marginal && !row.eig_stable) row.frequency_within_tolerance = row.f_ratio && *row.f_ratio <= tol;
    if (row.marginal) {
      ++r.excluded;
    } else {
      ++r.compared;
      if (row.agree) ++r.agreed;
    }
    r.rows.push_back(row);
  }
  return r;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json complex_list(const Eigen::VectorXcd& v) {
  auto a = nlohmann::json::array();
  for (const auto& z : v) a.push_back({z.real(), z.imag()});
  return a;
}

nlohmann::json crossings_json(const std::vector<BodeCrossing>& xs) {
  auto a = nlohmann::json::array();
  for (const auto& c : xs) a.push_back({{"locus", c.locus}, {"f_Hz", c.f_hz}, {"mag_dB", c.mag_db}});
  return a;
}

}  // namespace

nlohmann::json verdict_to_json(const StabilityVerdict& v) {
  nlohmann::json j;
  j["method"] = to_string(v.method);
  j["stable"] = v.stable;
  j["marginal"] = v.marginal;
  if (v.method == Method::kEigenvalue) {
    j["rhp_count"] = v.rhp_count;
    j["max_real"] = v.max_real;
  } else {
    j["encirclements"] = v.encirclements;
    j["min_distance"] = v.min_distance;
    j["gain_margin_dB"] = opt_json(v.gain_margin_db);
    j["phase_margin_deg"] = opt_json(v.phase_margin_deg);
  }
  j["critical_frequency_Hz"] = opt_json(v.critical_frequency_hz);
  if (!v.warnings.empty()) j["warnings"] = v.warnings;
  return j;
}

nlohmann::json analysis_to_json(const ConfigAnalysis& a) {
  nlohmann::json j;
  j["label"] = a.label;
  j["operating_point"] = {{"u", {a.op.u[0], a.op.u[1]}},
                          {"i", {a.op.i[0], a.op.i[1]}},
                          {"omega", a.op.omega},
                          {"delta0", a.op.delta0},
                          {"residual_pu", a.op.residual},
                          {"iterations", a.op.iterations}};
  j["gnc_extended"] = verdict_to_json(a.gnc_ext);
  j["gnc_standard"] = verdict_to_json(a.gnc_std);
  j["eigenvalue"] = verdict_to_json(a.eig);
  j["eigenvalues"] = complex_list(a.eigenvalues);
  j["crossings_extended"] = crossings_json(a.crossings_ext);
  j["crossings_standard"] = crossings_json(a.crossings_std);
  j["det_identity_error"] = a.det_identity_error;
  j["grid_points"] = a.L_ext.size();
  j["base_grid_points"] = a.base_points;
  return j;
}

nlohmann::json report_to_json(const EquivalenceReport& r) {
  nlohmann::json j;
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"label", row.label},
                    {"gnc_extended_stable", row.gnc_stable},
                    {"eigenvalue_stable", row.eig_stable},
                    {"marginal", row.marginal},
                    {"agree", row.agree},
                    {"f_gnc_Hz", opt_json(row.f_gnc_hz)},
                    {"f_eig_Hz", opt_json(row.f_eig_hz)},
                    {"frequency_ratio", opt_json(row.f_ratio)},
                    {"frequency_within_tolerance", row.frequency_within_tolerance},
                    {"min_distance_to_minus_one", row.min_distance},
                    {"max_real_eigenvalue", row.max_real}});
  }
  j["rows"] = rows;
  j["compared"] = r.compared;
  j["agreed"] = r.agreed;
  j["excluded_marginal"] = r.excluded;
  j["grid_ratio"] = r.grid_ratio;
  return j;
}

std::string report_to_text(const EquivalenceReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %-9s %-9s %-6s %10s %10s %9s\n", "configuration", "gnc-ext", "eigen",
                "agree", "f_gnc[Hz]", "f_eig[Hz]", "d(-1)");
  out << line;
  auto f = [](const std::optional<double>& v) {
    char b[32];
    if (v) std::snprintf(b, sizeof b, "%.4g", *v);
    else std::snprintf(b, sizeof b, "-");
    return std::string(b);
  };
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "%-36s %-9s %-9s %-6s %10s %10s %9.3g\n", row.label.c_str(),
                  row.gnc_stable ? "stable" : "unstable", row.eig_stable ? "stable" : "unstable",
                  row.marginal ? "excl" : (row.agree ? "yes" : "NO"), f(row.f_gnc_hz).c_str(),
                  f(row.f_eig_hz).c_str(), row.min_distance);
    out << line;
  }
  std::snprintf(line, sizeof line, "agreement: %zu/%zu compared, %zu marginal excluded\n", r.agreed, r.compared,
                r.excluded);
  out << line;
  return out.str();
}

}  // namespace freqstab
