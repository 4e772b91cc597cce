#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "params.hpp"

namespace freqstab {

struct RunConfig {
  std::string mode;          // extract | gnc | eigen | equivalence | sweep | simulate | identify
  std::string config_path;   // empty: built-in defaults
  std::optional<std::string> config_text;  // used instead of the file when set
  std::vector<std::string> sweeps;          // "path=v1,v2,..." each
  std::string out_dir = "out";
  bool plots = true;
  std::optional<double> f_min, f_max, points_per_decade;
  bool time_domain = true;   // sweep mode: confirm each verdict by simulation
};

const std::vector<std::string>& run_modes();

struct RunResult {
  int exit_code = 0;            // 0 ok, 1 config error, 2 analysis error
  nlohmann::json record;        // summary or error record
  std::vector<std::string> files;
};

/// Runs one mode and writes its artifacts under out_dir. Never throws for
/// configuration or analysis failures; those become an error record
/// (also written to out_dir/error.json when the directory is usable).
RunResult run(const RunConfig& cfg);

/// Configuration after applying overrides from `cfg`; throws config errors.
Config resolve_config(const RunConfig& cfg);

}  // namespace freqstab
