// freqstab command-line front end; everything goes through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "freqstab/freqstab.h"

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain stability analysis of grid-forming / grid-following converter pairs"};
  std::string config, mode, out = "out";
  std::vector<std::string> sweeps;
  bool no_plots = false;
  double f_min = 0.0, f_max = 0.0, ppd = 0.0;
  app.add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "extract | gnc | eigen | equivalence | sweep | simulate | identify")
      ->required()
      ->check(CLI::IsMember({"extract", "gnc", "eigen", "equivalence", "sweep", "simulate", "identify"}));
  app.add_option("--out", out, "output directory");
  app.add_option("--sweep", sweeps, "sweep as path=v1,v2,... (repeatable; joins paths with ';')");
  app.add_flag("--no-plots", no_plots, "skip SVG output");
  app.add_option("--freq-min", f_min, "grid lower frequency, Hz")->check(CLI::PositiveNumber);
  app.add_option("--freq-max", f_max, "grid upper frequency, Hz")->check(CLI::PositiveNumber);
  app.add_option("--points-per-decade", ppd, "grid density")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  std::vector<const char*> sweep_ptrs;
  for (const auto& s : sweeps) sweep_ptrs.push_back(s.c_str());
  fst_run_options opt{};
  opt.mode = mode.c_str();
  opt.config_path = config.empty() ? nullptr : config.c_str();
  opt.sweeps = sweep_ptrs.data();
  opt.sweep_count = sweep_ptrs.size();
  opt.out_dir = out.c_str();
  opt.plots = no_plots ? 0 : 1;
  opt.f_min = f_min;
  opt.f_max = f_max;
  opt.points_per_decade = ppd;

  int exit_code = 2;
  const fst_status st = fst_run(&opt, &exit_code);
  if (st != FST_OK) {
    std::fprintf(stderr, "{\"status\": \"error\", \"code\": \"%s\", \"message\": \"%s\"}\n", fst_status_name(st),
                 fst_last_error());
    return 2;
  }
  std::FILE* stream = exit_code == 0 ? stdout : stderr;
  std::fprintf(stream, "%s\n", fst_last_record());
  return exit_code;
}
