#include "params.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace freqstab {

double Nominal::omega0() const { return 2.0 * std::numbers::pi * f; }
double Nominal::V_peak() const { return V_ll * std::sqrt(2.0 / 3.0); }
double Nominal::I_peak() const { return P_rated / (1.5 * V_peak()); }

double SystemParams::V_ref() const { return gfm.V_star > 0.0 ? gfm.V_star : nominal.V_peak(); }

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kConfigInvalid, what);
}

struct Entry {
  std::function<double(const SystemParams&)> get;
  std::function<void(SystemParams&, double)> set;
};

template <class S, class M>
Entry plain(S SystemParams::*section, M S::*member) {
  return {[=](const SystemParams& p) { return p.*section.*member; },
          [=](SystemParams& p, double v) { p.*section.*member = v; }};
}

Entry optional_gain(std::optional<double> GflParams::*member) {
  return {[=](const SystemParams& p) {
            const auto& o = p.gfl.*member;
            return o ? *o : std::numeric_limits<double>::quiet_NaN();
          },
          [=](SystemParams& p, double v) {
            if (std::isnan(v)) {
              (p.gfl.*member).reset();
            } else {
              p.gfl.*member = v;
            }
          }};
}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> r = [] {
    std::map<std::string, Entry> m;
    const auto N = &SystemParams::nominal;
    m["nominal.P_rated"] = plain(N, &Nominal::P_rated);
    m["nominal.V_ll"] = plain(N, &Nominal::V_ll);
    m["nominal.f"] = plain(N, &Nominal::f);
    const auto G = &SystemParams::gfm;
    m["gfm.L_f"] = plain(G, &GfmParams::L_f);
    m["gfm.R_f"] = plain(G, &GfmParams::R_f);
    m["gfm.C_f"] = plain(G, &GfmParams::C_f);
    m["gfm.m_p"] = plain(G, &GfmParams::m_p);
    m["gfm.n_q"] = plain(G, &GfmParams::n_q);
    m["gfm.omega_c"] = plain(G, &GfmParams::omega_c);
    m["gfm.k_pv"] = plain(G, &GfmParams::k_pv);
    m["gfm.k_iv"] = plain(G, &GfmParams::k_iv);
    m["gfm.k_pc"] = plain(G, &GfmParams::k_pc);
    m["gfm.k_ic"] = plain(G, &GfmParams::k_ic);
    m["gfm.P_star"] = plain(G, &GfmParams::P_star);
    m["gfm.Q_star"] = plain(G, &GfmParams::Q_star);
    m["gfm.V_star"] = plain(G, &GfmParams::V_star);
    m["gfm.k_ff_i"] = plain(G, &GfmParams::k_ff_i);
    m["gfm.k_ff_v"] = plain(G, &GfmParams::k_ff_v);
    m["gfm.k_dec"] = plain(G, &GfmParams::k_dec);
    const auto W = &SystemParams::network;
    m["network.L_line"] = plain(W, &NetworkParams::L_line);
    m["network.R_line"] = plain(W, &NetworkParams::R_line);
    m["network.R_load"] = plain(W, &NetworkParams::R_load);
    const auto F = &SystemParams::gfl;
    m["gfl.L_c"] = plain(F, &GflParams::L_c);
    m["gfl.R_c"] = plain(F, &GflParams::R_c);
    m["gfl.alpha_c"] = plain(F, &GflParams::alpha_c);
    m["gfl.alpha_pll"] = plain(F, &GflParams::alpha_pll);
    m["gfl.zeta"] = plain(F, &GflParams::zeta);
    m["gfl.k_ff"] = plain(F, &GflParams::k_ff);
    m["gfl.k_dec"] = plain(F, &GflParams::k_dec);
    m["gfl.P_set"] = plain(F, &GflParams::P_set);
    m["gfl.Q_set"] = plain(F, &GflParams::Q_set);
    m["gfl.k_p"] = optional_gain(&GflParams::k_p);
    m["gfl.k_i"] = optional_gain(&GflParams::k_i);
    m["gfl.k_p_pll"] = optional_gain(&GflParams::k_p_pll);
    m["gfl.k_i_pll"] = optional_gain(&GflParams::k_i_pll);
    return m;
  }();
  return r;
}

const Entry& lookup(const std::string& path) {
  const auto& r = registry();
  auto it = r.find(path);
  if (it == r.end()) throw Error(ErrorCode::kConfigInvalid, "unknown parameter '" + path + "'");
  return it->second;
}

double parse_number(const std::string& text, const std::string& where) {
  std::string s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  s = s.substr(b);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(!s.empty() && end != s.c_str() && *end == '\0' && std::isfinite(v),
          "malformed number '" + text + "' for " + where);
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number(item, where));
  require(!out.empty(), "empty value list for " + where);
  return out;
}

}  // namespace

void SystemParams::validate() const {
  require(nominal.P_rated > 0 && nominal.V_ll > 0 && nominal.f > 0, "nominal values must be > 0");
  require(gfm.L_f > 0 && gfm.R_f > 0 && gfm.C_f > 0, "gfm filter values must be > 0");
  require(gfm.omega_c > 0, "gfm.omega_c must be > 0");
  require(gfm.m_p >= 0 && gfm.n_q >= 0, "droop gains must be >= 0");
  require(gfm.k_pv >= 0 && gfm.k_iv >= 0 && gfm.k_pc >= 0 && gfm.k_ic >= 0,
          "gfm controller gains must be >= 0");
  require(gfm.V_star >= 0, "gfm.V_star must be >= 0");
  require(network.L_line > 0 && network.R_line > 0 && network.R_load > 0,
          "network values must be > 0");
  require(gfl.L_c > 0 && gfl.R_c > 0, "gfl.L_c and gfl.R_c must be > 0");
  require(gfl.alpha_c > 0 && gfl.alpha_pll > 0, "gfl bandwidths must be > 0");
  require(gfl.zeta > 0, "gfl.zeta must be > 0");
  for (const auto* o : {&gfl.k_p, &gfl.k_i, &gfl.k_p_pll, &gfl.k_i_pll}) {
    require(!o->has_value() || (std::isfinite(**o) && **o >= 0), "explicit gfl gains must be >= 0");
  }
}

PllGains pll_gains(double alpha, double zeta, double V_peak) {
  if (!(alpha > 0) || !(zeta > 0) || !(V_peak > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "PLL mapping needs positive bandwidth, damping, voltage");
  }
  // closed loop (2 z wn s + wn^2) / (s^2 + 2 z wn s + wn^2): |H(j alpha)| = 1/sqrt(2)
  const double a = 1.0 + 2.0 * zeta * zeta;
  const double wn = alpha / std::sqrt(a + std::sqrt(a * a + 1.0));
  return {2.0 * zeta * wn / V_peak, wn * wn / V_peak, wn};
}

PllGains pll_gains(const GflParams& p, double V_peak) {
  PllGains g = pll_gains(p.alpha_pll, p.zeta, V_peak);
  if (p.k_p_pll) g.k_p = *p.k_p_pll;
  if (p.k_i_pll) g.k_i = *p.k_i_pll;
  return g;
}

CurrentGains current_gains(const GflParams& p) {
  CurrentGains g{p.alpha_c * p.L_c, p.alpha_c * p.R_c};
  if (p.k_p) g.k_p = *p.k_p;
  if (p.k_i) g.k_i = *p.k_i;
  return g;
}

std::vector<std::string> parameter_paths() {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

bool has_param(const std::string& path) { return registry().count(path) != 0; }

double get_param(const SystemParams& p, const std::string& path) { return lookup(path).get(p); }

void set_param(SystemParams& p, const std::string& path, double value) {
  const auto& e = lookup(path);
  require(std::isfinite(value) || path.rfind("gfl.k_", 0) == 0, "non-finite value for " + path);
  e.set(p, value);
}

std::size_t SweepSpec::count() const {
  std::size_t n = 0;
  for (const auto& v : values) n = std::max(n, v.size());
  return n;
}

SystemParams SweepSpec::apply(const SystemParams& base, std::size_t k) const {
  SystemParams p = base;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& v = values[i];
    set_param(p, paths[i], v.size() == 1 ? v[0] : v.at(k));
  }
  return p;
}

std::string SweepSpec::label(std::size_t k) const {
  std::ostringstream out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (values[i].size() == 1 && paths.size() > 1) continue;
    if (out.tellp() > 0) out << ' ';
    out << paths[i] << '=' << (values[i].size() == 1 ? values[i][0] : values[i][k]);
  }
  return out.str();
}

namespace {

void check_sweep(const SweepSpec& s) {
  require(!s.paths.empty(), "sweep '" + s.name + "' is empty");
  const std::size_t n = s.count();
  for (std::size_t i = 0; i < s.paths.size(); ++i) {
    require(has_param(s.paths[i]), "unknown sweep parameter '" + s.paths[i] + "'");
    require(s.values[i].size() == 1 || s.values[i].size() == n,
            "sweep '" + s.name + "' lists of unequal length");
  }
}

}  // namespace

SweepSpec parse_sweep(const std::string& name, const std::string& text) {
  SweepSpec s;
  s.name = name;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ';')) {
    const auto eq = part.find('=');
    require(eq != std::string::npos, "sweep must read path=v1,v2,...: '" + part + "'");
    std::string path = part.substr(0, eq);
    path.erase(0, path.find_first_not_of(" \t"));
    path.erase(path.find_last_not_of(" \t") + 1);
    s.paths.push_back(path);
    s.values.push_back(parse_list(part.substr(eq + 1), path));
  }
  check_sweep(s);
  return s;
}

Config parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("config parse error: ") + e.what());
  }
  Config cfg;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw Error(ErrorCode::kConfigInvalid, "key '" + section + "' outside of a section");
    }
    if (section == "nominal" || section == "gfm" || section == "network" || section == "gfl") {
      for (const auto& [key, v] : body) {
        const std::string path = section + "." + key;
        set_param(cfg.system, path, parse_number(v.data(), path));
      }
    } else if (section == "grid") {
      for (const auto& [key, v] : body) {
        const double x = parse_number(v.data(), "grid." + key);
        if (key == "f_min") cfg.grid.f_min = x;
        else if (key == "f_max") cfg.grid.f_max = x;
        else if (key == "points_per_decade") cfg.grid.points_per_decade = x;
        else throw Error(ErrorCode::kConfigInvalid, "unknown key grid." + key);
      }
    } else if (section == "sim") {
      for (const auto& [key, v] : body) {
        if (key == "override_path") {
          cfg.sim.override_path = v.data();
          require(has_param(v.data()), "unknown override parameter '" + v.data() + "'");
          continue;
        }
        const double x = parse_number(v.data(), "sim." + key);
        if (key == "duration") cfg.sim.duration = x;
        else if (key == "dt") cfg.sim.dt = x;
        else if (key == "record_dt") cfg.sim.record_dt = x;
        else if (key == "override_value") cfg.sim.override_value = x;
        else if (key == "override_time") cfg.sim.override_time = x;
        else throw Error(ErrorCode::kConfigInvalid, "unknown key sim." + key);
      }
    } else if (section == "identify") {
      for (const auto& [key, v] : body) {
        if (key == "device") {
          cfg.identify.device = v.data();
          require(v.data() == "gfl" || v.data() == "gfm" || v.data() == "rl",
                  "identify.device must be gfl, gfm or rl");
          continue;
        }
        const double x = parse_number(v.data(), "identify." + key);
        if (key == "f_min") cfg.identify.f_min = x;
        else if (key == "f_max") cfg.identify.f_max = x;
        else if (key == "count") cfg.identify.count = static_cast<int>(x);
        else if (key == "amplitude") cfg.identify.amplitude = x;
        else if (key == "omega_amplitude") cfg.identify.omega_amplitude = x;
        else if (key == "settle") cfg.identify.settle = x;
        else if (key == "dt") cfg.identify.dt = x;
        else throw Error(ErrorCode::kConfigInvalid, "unknown key identify." + key);
      }
    } else if (section.rfind("sweep.", 0) == 0) {
      SweepSpec s;
      s.name = section.substr(6);
      require(!s.name.empty(), "sweep section needs a name");
      for (const auto& [key, v] : body) {
        s.paths.push_back(key);
        s.values.push_back(parse_list(v.data(), key));
      }
      check_sweep(s);
      cfg.sweeps.push_back(std::move(s));
    } else {
      throw Error(ErrorCode::kConfigInvalid, "unknown section [" + section + "]");
    }
  }
  cfg.system.validate();
  require(cfg.grid.f_min > 0 && cfg.grid.f_max > cfg.grid.f_min && cfg.grid.points_per_decade > 0,
          "invalid grid section");
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kConfigInvalid, "cannot open config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace freqstab
