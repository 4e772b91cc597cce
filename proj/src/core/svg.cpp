#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace freqstab {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* colour(std::size_t k) { return kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))]; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf == std::string("-0.00") ? "0.00" : buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// "Nice" linear ticks covering [lo, hi].
std::vector<double> linear_ticks(double lo, double hi, int target = 6) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> t;
  const double first = std::ceil(lo / step);
  for (int k = 0; k < 100; ++k) {
    const double v = (first + k) * step;
    if (v > hi + 1e-9 * step) break;
    t.push_back(v);
  }
  return t;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void pad(double frac) {
    const double mag = std::max(std::abs(lo), std::abs(hi));
    if (hi <= lo) {
      const double d = std::max(std::abs(lo), 1.0) * 0.5;
      lo -= d;
      hi += d;
    } else if (hi - lo < 1e-9 * mag) {
      // below double resolution for ticks
      const double c = 0.5 * (lo + hi);
      lo = c - 1e-6 * mag;
      hi = c + 1e-6 * mag;
    }
    const double d = (hi - lo) * frac;
    lo -= d;
    hi += d;
  }
};

class Panel {
 public:
  Panel(double x, double y, double w, double h, Range xr, Range yr, bool logx)
      : x_(x), y_(y), w_(w), h_(h), xr_(xr), yr_(yr), logx_(logx) {}

  double px(double v) const {
    const double a = logx_ ? std::log10(v) : v;
    const double lo = logx_ ? std::log10(xr_.lo) : xr_.lo;
    const double hi = logx_ ? std::log10(xr_.hi) : xr_.hi;
    return x_ + (a - lo) / (hi - lo) * w_;
  }
  double py(double v) const { return y_ + h_ - (v - yr_.lo) / (yr_.hi - yr_.lo) * h_; }
  bool inside(double vx, double vy) const {
    return vx >= xr_.lo && vx <= xr_.hi && vy >= yr_.lo && vy <= yr_.hi && std::isfinite(vx) && std::isfinite(vy);
  }

  void axes(std::ostringstream& o, const std::string& xlabel, const std::string& ylabel) const {
    o << "<rect x=\"" << num(x_) << "\" y=\"" << num(y_) << "\" width=\"" << num(w_) << "\" height=\"" << num(h_)
      << "\" fill=\"none\" stroke=\"#000\"/>\n";
    std::vector<double> xt;
    if (logx_) {
      for (double e = std::ceil(std::log10(xr_.lo) - 1e-9); e <= std::log10(xr_.hi) + 1e-9; e += 1.0) {
        xt.push_back(std::pow(10.0, e));
      }
    } else {
      xt = linear_ticks(xr_.lo, xr_.hi);
    }
    for (double t : xt) {
      const double X = px(t);
      o << "<line x1=\"" << num(X) << "\" y1=\"" << num(y_) << "\" x2=\"" << num(X) << "\" y2=\"" << num(y_ + h_)
        << "\" stroke=\"#ddd\"/>\n";
      o << "<text x=\"" << num(X) << "\" y=\"" << num(y_ + h_ + 14) << "\" font-size=\"10\" text-anchor=\"middle\">"
        << tick_label(t) << "</text>\n";
    }
    for (double t : linear_ticks(yr_.lo, yr_.hi)) {
      const double Y = py(t);
      o << "<line x1=\"" << num(x_) << "\" y1=\"" << num(Y) << "\" x2=\"" << num(x_ + w_) << "\" y2=\"" << num(Y)
        << "\" stroke=\"#ddd\"/>\n";
      o << "<text x=\"" << num(x_ - 4) << "\" y=\"" << num(Y + 3) << "\" font-size=\"10\" text-anchor=\"end\">"
        << tick_label(t) << "</text>\n";
    }
    o << "<text x=\"" << num(x_ + w_ / 2) << "\" y=\"" << num(y_ + h_ + 30)
      << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
    o << "<text x=\"" << num(x_ - 42) << "\" y=\"" << num(y_ + h_ / 2) << "\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 " << num(x_ - 42) << " " << num(y_ + h_ / 2) << ")\">" << escape(ylabel)
      << "</text>\n";
  }

  /// Polyline split wherever a point leaves the panel.
  void line(std::ostringstream& o, const std::vector<double>& xs, const std::vector<double>& ys,
            const char* stroke, const char* extra = "") const {
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) {
        o << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.2\"" << extra << " points=\"" << pts
          << "\"/>\n";
      }
      pts.clear();
    };
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (!inside(xs[k], ys[k])) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += num(px(xs[k])) + "," + num(py(ys[k]));
    }
    flush();
  }

  void legend(std::ostringstream& o, std::size_t k, const std::string& label, const char* stroke) const {
    const double Y = y_ + 14 + 14 * static_cast<double>(k);
    o << "<line x1=\"" << num(x_ + w_ - 120) << "\" y1=\"" << num(Y - 4) << "\" x2=\"" << num(x_ + w_ - 100)
      << "\" y2=\"" << num(Y - 4) << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(x_ + w_ - 95) << "\" y=\"" << num(Y) << "\" font-size=\"10\">" << escape(label)
      << "</text>\n";
  }

 private:
  double x_, y_, w_, h_;
  Range xr_, yr_;
  bool logx_;
};

void header(std::ostringstream& o, double w, double h, const std::string& title) {
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
    << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\" font-family=\"sans-serif\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  if (!title.empty()) {
    o << "<text x=\"" << num(w / 2) << "\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">" << escape(title)
      << "</text>\n";
  }
}

Range finite_range(const std::vector<double>& v) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    r.lo = std::min(r.lo, x);
    r.hi = std::max(r.hi, x);
  }
  if (!std::isfinite(r.lo)) r = {0.0, 1.0};
  return r;
}

}  // namespace

std::vector<ComplexCurve> loci_curves(const EigenLoci& loci, const std::string& suffix) {
  return {{"lambda1" + suffix, loci.freq_hz, loci.lambda1}, {"lambda2" + suffix, loci.freq_hz, loci.lambda2}};
}

std::string bode_svg(const std::vector<ComplexCurve>& curves, const std::string& title) {
  std::vector<double> f_all, mag_all;
  std::vector<std::vector<double>> mags, phases;
  for (const auto& c : curves) {
    if (c.freq_hz.size() != c.values.size()) throw Error(ErrorCode::kDimensionMismatch, "curve size mismatch");
    std::vector<double> m, ph;
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      if (!(c.freq_hz[k] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bode frequencies must be > 0");
      m.push_back(20.0 * std::log10(std::abs(c.values[k])));
      ph.push_back(std::arg(c.values[k]) * 180.0 / std::numbers::pi);
      f_all.push_back(c.freq_hz[k]);
    }
    mag_all.insert(mag_all.end(), m.begin(), m.end());
    mags.push_back(std::move(m));
    phases.push_back(std::move(ph));
  }
  if (f_all.empty()) throw Error(ErrorCode::kEmptyDataset, "bode plot needs data");
  Range fr = finite_range(f_all);
  if (fr.hi <= fr.lo) {
    fr.lo /= 2.0;
    fr.hi *= 2.0;
  }
  Range mr = finite_range(mag_all);
  mr.pad(0.05);
  const Range pr{-180.0, 180.0};
  const double W = 760, H = 560;
  std::ostringstream o;
  header(o, W, H, title);
  const Panel top(70, 30, 660, 220, fr, mr, true), bot(70, 300, 660, 200, fr, pr, true);
  top.axes(o, "", "magnitude (dB)");
  bot.axes(o, "frequency (Hz)", "phase (deg)");
  for (std::size_t c = 0; c < curves.size(); ++c) {
    top.line(o, curves[c].freq_hz, mags[c], colour(c));
    // phase wraps: break the line at jumps larger than 180 deg
    std::vector<double> f = curves[c].freq_hz, ph = phases[c];
    std::vector<double> fx, py;
    for (std::size_t k = 0; k < ph.size(); ++k) {
      if (k > 0 && std::abs(ph[k] - ph[k - 1]) > 180.0) {
        fx.push_back(std::numeric_limits<double>::quiet_NaN());
        py.push_back(std::numeric_limits<double>::quiet_NaN());
      }
      fx.push_back(f[k]);
      py.push_back(ph[k]);
    }
    bot.line(o, fx, py, colour(c));
    top.legend(o, c, curves[c].label, colour(c));
  }
  o << "</svg>\n";
  return o.str();
}

std::string nyquist_svg(const std::vector<ComplexCurve>& curves, bool unit_circle, const std::string& title) {
  std::size_t points = 0;
  std::vector<double> re_all, im_all;
  for (const auto& c : curves) {
    points += c.values.size();
    for (const auto& v : c.values) {
      re_all.push_back(v.real());
      im_all.push_back(v.imag());
      im_all.push_back(-v.imag());
    }
  }
  if (points == 0 && !unit_circle) throw Error(ErrorCode::kEmptyDataset, "nyquist plot needs data");
  // square view, at least the unit circle and -1, at most +-4
  double extent = 1.5;
  if (points > 0) {
    const Range rr = finite_range(re_all), ir = finite_range(im_all);
    extent = std::max({extent, std::abs(rr.lo), std::abs(rr.hi), std::abs(ir.lo), std::abs(ir.hi)});
    extent = std::min(extent * 1.05, 4.0);
  }
  const Range r{-extent, extent};
  const double W = 600, H = 620;
  std::ostringstream o;
  header(o, W, H, title);
  const Panel p(70, 30, 500, 500, r, r, false);
  p.axes(o, "real", "imaginary");
  if (unit_circle) {
    const double R = p.px(1.0) - p.px(0.0);
    o << "<circle cx=\"" << num(p.px(0.0)) << "\" cy=\"" << num(p.py(0.0)) << "\" r=\"" << num(R)
      << "\" fill=\"none\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  }
  if (points > 0) {
    o << "<path d=\"M " << num(p.px(-1.0) - 5) << " " << num(p.py(0.0) - 5) << " l 10 10 m 0 -10 l -10 10\" "
      << "stroke=\"#000\" stroke-width=\"2\"/>\n";
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    std::vector<double> xs, ys, ysm;
    for (const auto& v : curves[c].values) {
      xs.push_back(v.real());
      ys.push_back(v.imag());
      ysm.push_back(-v.imag());
    }
    p.line(o, xs, ys, colour(c));
    p.line(o, xs, ysm, colour(c), " stroke-dasharray=\"3 2\"");
    p.legend(o, c, curves[c].label, colour(c));
  }
  o << "</svg>\n";
  return o.str();
}

std::string eigtrace_svg(const std::vector<EigenTraceEntry>& entries, const std::string& title) {
  std::vector<double> re, im;
  for (const auto& e : entries) {
    for (const auto& l : e.eigenvalues) {
      re.push_back(l.real());
      im.push_back(l.imag() / (2.0 * std::numbers::pi));
    }
  }
  if (re.empty()) throw Error(ErrorCode::kEmptyDataset, "eigenvalue trace needs data");
  Range rr = finite_range(re), ir = finite_range(im);
  rr.hi = std::max(rr.hi, 0.0);
  rr.pad(0.05);
  ir.pad(0.05);
  const double W = 760, H = 560;
  std::ostringstream o;
  header(o, W, H, title);
  const Panel p(70, 30, 660, 460, rr, ir, false);
  p.axes(o, "real part (1/s)", "imaginary part (Hz)");
  o << "<line x1=\"" << num(p.px(0.0)) << "\" y1=\"" << num(p.py(ir.hi)) << "\" x2=\"" << num(p.px(0.0))
    << "\" y2=\"" << num(p.py(ir.lo)) << "\" stroke=\"#000\" stroke-dasharray=\"2 2\"/>\n";
  for (std::size_t c = 0; c < entries.size(); ++c) {
    for (const auto& l : entries[c].eigenvalues) {
      const double x = l.real(), y = l.imag() / (2.0 * std::numbers::pi);
      if (!p.inside(x, y)) continue;
      o << "<circle cx=\"" << num(p.px(x)) << "\" cy=\"" << num(p.py(y)) << "\" r=\"2.5\" fill=\"" << colour(c)
        << "\"/>\n";
    }
    p.legend(o, c, entries[c].label, colour(c));
  }
  o << "</svg>\n";
  return o.str();
}

std::string timeseries_svg(const TimeSeries& ts, const std::vector<std::string>& channels, const std::string& title) {
  const std::vector<std::string> names = channels.empty() ? ts.names : channels;
  if (ts.size() == 0 || names.empty()) throw Error(ErrorCode::kEmptyDataset, "time series plot needs data");
  std::vector<double> t(ts.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = ts.time(k);
  Range tr{t.front(), t.back()};
  if (tr.hi <= tr.lo) tr.hi = tr.lo + 1.0;
  const double panel_h = 120, W = 760;
  const double H = 50 + (panel_h + 40) * static_cast<double>(names.size());
  std::ostringstream o;
  header(o, W, H, title);
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& y = ts.channel(names[c]);
    Range yr = finite_range(y);
    yr.pad(0.05);
    const Panel p(70, 30 + (panel_h + 40) * static_cast<double>(c), 660, panel_h, tr, yr, false);
    p.axes(o, c + 1 == names.size() ? "time (s)" : "", names[c]);
    p.line(o, t, y, colour(c));
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace freqstab
