#include "runner.hpp"

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <numbers>
#include <mutex>

#include "error.hpp"
#include "extraction.hpp"
#include "identification.hpp"
#include "samples_io.hpp"
#include "stability.hpp"
#include "svg.hpp"
#include "timedomain.hpp"

namespace freqstab {

namespace fs = std::filesystem;

namespace {

struct Labelled {
  std::string sweep;  // empty for the base case
  std::string label;
  std::string stem;   // file name stem
  SystemParams params;
};

class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create output directory '" + dir_ + "': " + ec.message());
  }
  void text(const std::string& name, const std::string& body) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::string path = (fs::path(dir_) / name).string();
    write_text_file(path, body);
    files_.push_back(path);
  }
  void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::mutex mu_;
  std::vector<std::string> files_;
};

std::vector<Labelled> configurations(const Config& cfg, bool need_sweeps) {
  std::vector<Labelled> out;
  if (cfg.sweeps.empty()) {
    if (need_sweeps) throw Error(ErrorCode::kConfigInvalid, "no sweep given (use --sweep or a [sweep.NAME] section)");
    out.push_back({"", "base", "base", cfg.system});
    return out;
  }
  for (const auto& s : cfg.sweeps) {
    if (s.count() == 0) throw Error(ErrorCode::kConfigInvalid, "sweep '" + s.name + "' has no values");
    for (std::size_t k = 0; k < s.count(); ++k) {
      char stem[96];
      std::snprintf(stem, sizeof stem, "%s_%02zu", s.name.c_str(), k);
      SystemParams p = s.apply(cfg.system, k);
      p.validate();
      out.push_back({s.name, s.label(k), stem, p});
    }
  }
  return out;
}

AnalysisOptions options(const Config& cfg) {
  AnalysisOptions opt;
  opt.grid = cfg.grid;
  return opt;
}

nlohmann::json time_domain_json(const TimeDomainCheck& c) {
  nlohmann::json j{{"growth_rate", c.growth_rate}, {"diverged", c.diverged}, {"stable", !c.diverged && c.growth_rate < 0.0}};
  if (c.tone) {
    j["tone"] = {{"frequency_Hz", c.tone->frequency_hz},
                 {"growth_rate", c.tone->growth_rate},
                 {"peak_over_median_dB", c.tone->peak_over_median_db}};
  } else {
    j["tone"] = nullptr;
    j["tone_error"] = c.tone_error;
  }
  return j;
}

void plot_loops(Output& out, const ConfigAnalysis& a, const std::string& stem) {
  auto curves = loci_curves(a.loci_ext, " (extended)");
  for (auto& c : loci_curves(a.loci_std, " (standard)")) curves.push_back(std::move(c));
  out.text(stem + "_bode.svg", bode_svg(curves, "eigenvalue loci, " + a.label));
  out.text(stem + "_nyquist.svg", nyquist_svg(curves, true, "eigenvalue loci, " + a.label));
}

nlohmann::json mode_extract(const Config& cfg, const RunConfig& rc, Output& out) {
  const auto cases = configurations(cfg, false);
  nlohmann::json summary = nlohmann::json::array();
  const auto f = log_grid(cfg.grid.f_min, cfg.grid.f_max, cfg.grid.points_per_decade);
  for (const auto& c : cases) {
    const OperatingPoint op = solve_operating_point(c.params);
    const StateSpaceModel gfm = build_gfm_model(c.params, op), gfl = build_gfl_model(c.params, op);
    const TransferSamples Zv = vsm_impedance(gfm, f), Yc = csm_admittance(gfl, f), Pc = csm_frequency_admittance(gfl, f);
    const TransferSamples Gv = vsm_frequency_impedance(gfm, GammaMethod::kExactInversion, kDefaultVirtualResistor, f);
    const TransferSamples Gv_r = vsm_frequency_impedance(gfm, GammaMethod::kVirtualResistor, kDefaultVirtualResistor, f);
    const std::pair<const char*, const TransferSamples*> items[] = {
        {"Zv", &Zv}, {"Gv", &Gv}, {"Gv_virtual_resistor", &Gv_r}, {"Yc", &Yc}, {"Pc", &Pc}};
    for (const auto& [name, s] : items) {
      out.text(c.stem + "_" + name + ".csv", samples_to_csv(*s));
      out.json(c.stem + "_" + name + ".json", samples_to_json(*s));
    }
    const TransferSamples Le = minor_loop(Zv, Gv, Yc, Pc, true), Ls = minor_loop(Zv, Gv, Yc, Pc, false);
    const EigenLoci le = loci_of(Le), ls = loci_of(Ls);
    out.json(c.stem + "_loci_extended.json", loci_to_json(le));
    out.json(c.stem + "_loci_standard.json", loci_to_json(ls));
    if (rc.plots) {
      auto curves = loci_curves(le, " (extended)");
      for (auto& k : loci_curves(ls, " (standard)")) curves.push_back(std::move(k));
      out.text(c.stem + "_bode.svg", bode_svg(curves, "eigenvalue loci, " + c.label));
      out.text(c.stem + "_nyquist.svg", nyquist_svg(curves, true, "eigenvalue loci, " + c.label));
    }
    summary.push_back({{"label", c.label}, {"points", f.size()}, {"warnings", Gv_r.warnings}});
  }
  return summary;
}

nlohmann::json mode_analysis(const Config& cfg, const RunConfig& rc, Output& out, bool gnc) {
  const auto cases = configurations(cfg, false);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cases) {
    const ConfigAnalysis a = analyze_configuration(c.params, options(cfg), c.label);
    nlohmann::json j = analysis_to_json(a);
    if (gnc) {
      out.json(c.stem + "_gnc.json", j);
      out.json(c.stem + "_loci_extended.json", loci_to_json(a.loci_ext));
      out.json(c.stem + "_loci_standard.json", loci_to_json(a.loci_std));
      if (rc.plots) plot_loops(out, a, c.stem);
      rows.push_back({{"label", c.label}, {"gnc_extended", j["gnc_extended"]}, {"gnc_standard", j["gnc_standard"]}});
    } else {
      std::string csv = "re,im\n";
      for (Eigen::Index k = 0; k < a.eigenvalues.size(); ++k) {
        csv += format_double(a.eigenvalues[k].real()) + "," + format_double(a.eigenvalues[k].imag()) + "\n";
      }
      out.text(c.stem + "_eigenvalues.csv", csv);
      out.json(c.stem + "_eigen.json", {{"label", c.label}, {"verdict", j["eigenvalue"]}, {"eigenvalues", j["eigenvalues"]}});
      if (rc.plots) out.text(c.stem + "_eigtrace.svg", eigtrace_svg({{c.label, {a.eigenvalues.data(), a.eigenvalues.data() + a.eigenvalues.size()}}}, "eigenvalues, " + c.label));
      rows.push_back({{"label", c.label}, {"eigenvalue", j["eigenvalue"]}});
    }
  }
  return rows;
}

nlohmann::json mode_sweep(const Config& cfg, const RunConfig& rc, Output& out, bool equivalence_only) {
  const auto cases = configurations(cfg, true);
  std::vector<ConfigAnalysis> runs;
  runs.reserve(cases.size());
  for (const auto& c : cases) runs.push_back(analyze_configuration(c.params, options(cfg), c.label));
  const EquivalenceReport rep = equivalence_report(runs, cfg.grid);
  out.json("equivalence.json", report_to_json(rep));
  out.text("equivalence.txt", report_to_text(rep));
  nlohmann::json summary;
  summary["equivalence"] = report_to_json(rep);
  if (equivalence_only) return summary;

  nlohmann::json rows = nlohmann::json::array();
  std::string csv = "sweep,label,gnc_extended_stable,gnc_standard_stable,eigen_stable,marginal,max_real,f_crit_Hz,td_growth_rate,td_stable\n";
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& a = runs[k];
    nlohmann::json row = analysis_to_json(a);
    row["sweep"] = cases[k].sweep;
    TimeDomainCheck td;
    if (rc.time_domain) {
      td = time_domain_check(a.params);
      row["time_domain"] = time_domain_json(td);
    }
    rows.push_back(row);
    const bool marg = a.gnc_ext.marginal || a.eig.marginal;
    csv += cases[k].sweep + ",\"" + a.label + "\"," + (a.gnc_ext.stable ? "1" : "0") + "," + (a.gnc_std.stable ? "1" : "0") +
           "," + (a.eig.stable ? "1" : "0") + "," + (marg ? "1" : "0") + "," + format_double(a.eig.max_real) + "," +
           (a.eig.critical_frequency_hz ? format_double(*a.eig.critical_frequency_hz) : "") + "," +
           (rc.time_domain ? format_double(td.growth_rate) : "") + "," +
           (rc.time_domain ? (!td.diverged && td.growth_rate < 0.0 ? "1" : "0") : "") + "\n";
    if (rc.plots) plot_loops(out, a, cases[k].stem);
  }
  out.text("sweep.csv", csv);
  out.json("sweep.json", rows);
  if (rc.plots) {
    for (const auto& s : cfg.sweeps) {
      std::vector<EigenTraceEntry> entries;
      for (std::size_t k = 0; k < runs.size(); ++k) {
        if (cases[k].sweep != s.name) continue;
        const auto& ev = runs[k].eigenvalues;
        entries.push_back({runs[k].label, {ev.data(), ev.data() + ev.size()}});
      }
      out.text("eigtrace_" + s.name + ".svg", eigtrace_svg(entries, "eigenvalue trace, sweep " + s.name));
    }
  }
  summary["rows"] = rows;
  return summary;
}

nlohmann::json mode_simulate(const Config& cfg, const RunConfig& rc, Output& out) {
  Scenario sc;
  sc.params = cfg.system;
  sc.duration = cfg.sim.duration;
  sc.dt = cfg.sim.dt;
  sc.record_dt = cfg.sim.record_dt;
  if (!cfg.sim.override_path.empty()) {
    sc.change = ParameterOverride{cfg.sim.override_path, cfg.sim.override_value, cfg.sim.override_time};
  }
  const TimeSeries ts = simulate(sc);
  out.text("timeseries.csv", timeseries_to_csv(ts));
  if (rc.plots) out.text("timeseries.svg", timeseries_svg(ts, {}, "simulation"));
  nlohmann::json j{{"samples", ts.size()}, {"diverged", ts.diverged}};
  if (ts.diverged) j["divergence_time"] = ts.divergence_time;
  const double window = std::min(4.0, 0.5 * sc.duration);
  try {
    const Oscillation o = estimate_oscillation(ts, "omega_v", window);
    j["oscillation"] = {{"channel", "omega_v"},
                        {"frequency_Hz", o.frequency_hz},
                        {"growth_rate", o.growth_rate},
                        {"peak_over_median_dB", o.peak_over_median_db}};
  } catch (const Error& e) {
    j["oscillation"] = nullptr;
    j["oscillation_error"] = e.what();
  }
  out.json("simulation.json", j);
  return j;
}

nlohmann::json mode_identify(const Config& cfg, const RunConfig& rc, Output& out) {
  const IdentifySettings& s = cfg.identify;
  if (s.count < 1 || !(s.f_min > 0.0) || !(s.f_max >= s.f_min)) {
    throw Error(ErrorCode::kConfigInvalid, "identify needs count >= 1 and 0 < f_min <= f_max");
  }
  std::vector<double> f;
  for (int k = 0; k < s.count; ++k) {
    f.push_back(s.count == 1 ? s.f_min : s.f_min * std::pow(s.f_max / s.f_min, static_cast<double>(k) / (s.count - 1)));
  }
  InjectionPlan plan = default_plan(cfg.system, f, s.device, s.amplitude, s.omega_amplitude);
  plan.settle = s.settle;
  plan.dt = s.dt;
  std::vector<std::pair<std::string, std::pair<TransferSamples, TransferSamples>>> results;
  if (s.device == "rl") {
    const auto& n = cfg.system.network;
    const auto dev = make_rl_device(n.R_line, n.L_line, cfg.system.nominal.omega0());
    TransferSamples Y = identify_admittance(*dev, plan);
    const StateSpaceModel m = rl_branch_model(n.R_line, n.L_line, cfg.system.nominal.omega0());
    TransferSamples Ya(2, 2);
    for (double fk : Y.freq_hz) Ya.push_back(fk, eval_response(m, "u", "i", 2.0 * std::numbers::pi * fk));
    results.push_back({"Y_rl", {Y, Ya}});
  } else {
    const OperatingPoint op = solve_operating_point(cfg.system);
    if (s.device == "gfl") {
      const auto dev = make_gfl_device(cfg.system, op);
      const StateSpaceModel m = build_gfl_model(cfg.system, op);
      TransferSamples Y = identify_admittance(*dev, plan);
      TransferSamples P = identify_frequency_vector(*dev, plan);
      results.push_back({"Yc", {Y, csm_admittance(m, Y.freq_hz)}});
      results.push_back({"Pc", {P, csm_frequency_admittance(m, P.freq_hz)}});
    } else {
      const auto dev = make_gfm_device(cfg.system, op);
      const StateSpaceModel m = build_gfm_model(cfg.system, op);
      VsmIdentification v = identify_impedance(*dev, plan);
      results.push_back({"Zv", {v.Zv, vsm_impedance(m, v.Zv.freq_hz)}});
      results.push_back({"Gv", {v.Gv, vsm_frequency_impedance(m, GammaMethod::kExactInversion, kDefaultVirtualResistor, v.Gv.freq_hz)}});
    }
  }
  nlohmann::json j{{"device", s.device}, {"requested_Hz", f}};
  for (const auto& [name, pair] : results) {
    const auto& [id, an] = pair;
    out.text(name + "_identified.csv", samples_to_csv(id));
    out.json(name + "_identified.json", samples_to_json(id));
    out.text(name + "_analytic.csv", samples_to_csv(an));
    out.json(name + "_analytic.json", samples_to_json(an));
    if (rc.plots) {
      std::vector<ComplexCurve> curves;
      for (int r = 0; r < id.rows; ++r) {
        for (int c = 0; c < id.cols; ++c) {
          ComplexCurve ci{name + "[" + std::to_string(r + 1) + std::to_string(c + 1) + "] identified", id.freq_hz, {}};
          ComplexCurve ca{name + "[" + std::to_string(r + 1) + std::to_string(c + 1) + "] analytic", an.freq_hz, {}};
          for (std::size_t k = 0; k < id.size(); ++k) {
            ci.values.push_back(id.values[k](r, c));
            ca.values.push_back(an.values[k](r, c));
          }
          curves.push_back(std::move(ci));
          curves.push_back(std::move(ca));
        }
      }
      out.text(name + "_bode.svg", bode_svg(curves, name + " identified vs analytic"));
    }
    j["responses"][name] = {{"snapped_Hz", id.freq_hz},
                            {"max_relative_error", max_relative_error(id, an)},
                            {"warnings", id.warnings}};
  }
  out.json("identification.json", j);
  return j;
}

}  // namespace

const std::vector<std::string>& run_modes() {
  static const std::vector<std::string> m{"extract", "gnc", "eigen", "equivalence", "sweep", "simulate", "identify"};
  return m;
}

Config resolve_config(const RunConfig& rc) {
  if (std::find(run_modes().begin(), run_modes().end(), rc.mode) == run_modes().end()) {
    throw Error(ErrorCode::kConfigInvalid, "unknown mode '" + rc.mode + "'");
  }
  Config cfg;
  if (rc.config_text) {
    cfg = parse_config(*rc.config_text);
  } else if (!rc.config_path.empty()) {
    cfg = load_config(rc.config_path);
  }
  if (!rc.sweeps.empty()) {
    // command-line sweeps replace the ones from the file
    cfg.sweeps.clear();
    for (std::size_t k = 0; k < rc.sweeps.size(); ++k) {
      cfg.sweeps.push_back(parse_sweep("sweep" + std::to_string(k + 1), rc.sweeps[k]));
    }
  }
  if (rc.f_min) cfg.grid.f_min = *rc.f_min;
  if (rc.f_max) cfg.grid.f_max = *rc.f_max;
  if (rc.points_per_decade) cfg.grid.points_per_decade = *rc.points_per_decade;
  if (!(cfg.grid.f_min > 0.0) || !(cfg.grid.f_max > cfg.grid.f_min) || !(cfg.grid.points_per_decade >= 1.0)) {
    throw Error(ErrorCode::kConfigInvalid, "grid needs 0 < f_min < f_max and points_per_decade >= 1");
  }
  cfg.system.validate();
  return cfg;
}

RunResult run(const RunConfig& rc) {
  RunResult res;
  auto fail = [&](std::optional<ErrorCode> code, const std::string& what) {
    const bool config = code && is_config_error(*code);
    res.exit_code = config ? 1 : 2;
    res.record = {{"status", "error"},
                  {"mode", rc.mode},
                  {"kind", config ? "config-invalid" : "analysis-failed"},
                  {"code", code ? std::string(to_string(*code)) : std::string("internal")},
                  {"message", what}};
    try {
      Output out(rc.out_dir);
      out.json("error.json", res.record);
      res.files = out.files();
    } catch (...) {
    }
  };
  try {
    const Config cfg = resolve_config(rc);
    Output out(rc.out_dir);
    nlohmann::json body;
    if (rc.mode == "extract") {
      body = mode_extract(cfg, rc, out);
    } else if (rc.mode == "gnc") {
      body = mode_analysis(cfg, rc, out, true);
    } else if (rc.mode == "eigen") {
      body = mode_analysis(cfg, rc, out, false);
    } else if (rc.mode == "equivalence") {
      body = mode_sweep(cfg, rc, out, true);
    } else if (rc.mode == "sweep") {
      body = mode_sweep(cfg, rc, out, false);
    } else if (rc.mode == "simulate") {
      body = mode_simulate(cfg, rc, out);
    } else {
      body = mode_identify(cfg, rc, out);
    }
    res.record = {{"status", "ok"}, {"mode", rc.mode}, {"result", body}};
    out.json("summary.json", res.record);
    res.files = out.files();
  } catch (const Error& e) {
    fail(e.code(), e.what());
  } catch (const std::exception& e) {
    fail(std::nullopt, e.what());
  }
  return res;
}

}  // namespace freqstab
