#include "samples_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace freqstab {

int TimeSeries::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return static_cast<int>(k);
  }
  return -1;
}

const std::vector<double>& TimeSeries::channel(const std::string& name) const {
  const int k = index_of(name);
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "unknown channel '" + name + "'");
  return channels[static_cast<std::size_t>(k)];
}

void TimeSeries::add_channel(std::string name) {
  names.push_back(std::move(name));
  channels.emplace_back();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw Error(ErrorCode::kConfigInvalid, "not a number: '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    out.push_back(cur);
  }
  return out;
}

std::string entry_name(int r, int c) { return std::to_string(r + 1) + std::to_string(c + 1); }

}  // namespace

std::string samples_to_csv(const TransferSamples& s) {
  std::ostringstream out;
  out << "f_Hz";
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) out << ",re_" << entry_name(r, c) << ",im_" << entry_name(r, c);
  }
  out << '\n';
  for (std::size_t k = 0; k < s.size(); ++k) {
    out << format_double(s.freq_hz[k]);
    for (int r = 0; r < s.rows; ++r) {
      for (int c = 0; c < s.cols; ++c) {
        out << ',' << format_double(s.values[k](r, c).real()) << ','
            << format_double(s.values[k](r, c).imag());
      }
    }
    out << '\n';
  }
  return out.str();
}

TransferSamples samples_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kEmptyDataset, "empty CSV");
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "f_Hz" || header.size() % 2 != 1) {
    throw Error(ErrorCode::kConfigInvalid, "unexpected CSV header");
  }
  int rows = 0, cols = 0;
  for (std::size_t k = 1; k < header.size(); k += 2) {
    const auto& h = header[k];
    if (h.size() != 5 || h.rfind("re_", 0) != 0) throw Error(ErrorCode::kConfigInvalid, "bad column " + h);
    rows = std::max(rows, h[3] - '0');
    cols = std::max(cols, h[4] - '0');
  }
  if (rows * cols * 2 + 1 != static_cast<int>(header.size())) {
    throw Error(ErrorCode::kConfigInvalid, "CSV columns do not form a matrix");
  }
  TransferSamples s(rows, cols);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw Error(ErrorCode::kConfigInvalid, "ragged CSV row");
    Eigen::MatrixXcd m(rows, cols);
    std::size_t i = 1;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c, i += 2) m(r, c) = cd(parse_double(f[i]), parse_double(f[i + 1]));
    }
    s.push_back(parse_double(f[0]), std::move(m));
  }
  s.validate();
  return s;
}

nlohmann::json samples_to_json(const TransferSamples& s) {
  nlohmann::json j;
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["f_Hz"] = s.freq_hz;
  auto& vals = j["values"] = nlohmann::json::array();
  for (const auto& m : s.values) {
    auto entry = nlohmann::json::array();
    for (int r = 0; r < s.rows; ++r) {
      for (int c = 0; c < s.cols; ++c) entry.push_back({m(r, c).real(), m(r, c).imag()});
    }
    vals.push_back(std::move(entry));
  }
  if (!s.warnings.empty()) j["warnings"] = s.warnings;
  return j;
}

TransferSamples samples_from_json(const nlohmann::json& j) {
  try {
    TransferSamples s(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto f = j.at("f_Hz").get<std::vector<double>>();
    const auto& vals = j.at("values");
    if (vals.size() != f.size()) throw Error(ErrorCode::kDimensionMismatch, "values/grid length");
    for (std::size_t k = 0; k < f.size(); ++k) {
      Eigen::MatrixXcd m(s.rows, s.cols);
      std::size_t i = 0;
      for (int r = 0; r < s.rows; ++r) {
        for (int c = 0; c < s.cols; ++c, ++i) {
          m(r, c) = cd(vals[k].at(i).at(0).get<double>(), vals[k].at(i).at(1).get<double>());
        }
      }
      s.push_back(f[k], std::move(m));
    }
    if (j.contains("warnings")) s.warnings = j["warnings"].get<std::vector<std::string>>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("malformed samples JSON: ") + e.what());
  }
}

nlohmann::json loci_to_json(const EigenLoci& loci) {
  nlohmann::json j;
  j["f_Hz"] = loci.freq_hz;
  auto pack = [](const std::vector<cd>& v) {
    auto a = nlohmann::json::array();
    for (const auto& z : v) a.push_back({z.real(), z.imag()});
    return a;
  };
  j["lambda1"] = pack(loci.lambda1);
  j["lambda2"] = pack(loci.lambda2);
  return j;
}

std::string timeseries_to_csv(const TimeSeries& ts) {
  std::ostringstream out;
  out << 't';
  for (const auto& n : ts.names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < ts.size(); ++k) {
    out << format_double(ts.time(k));
    for (const auto& ch : ts.channels) out << ',' << format_double(ch[k]);
    out << '\n';
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace freqstab
