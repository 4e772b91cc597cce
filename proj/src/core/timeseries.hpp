#pragma once

#include <string>
#include <vector>

namespace freqstab {

/// Uniformly sampled channels. Samples after a declared divergence are absent.
struct TimeSeries {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> channels;
  bool diverged = false;
  double divergence_time = 0.0;

  std::size_t size() const { return channels.empty() ? 0 : channels.front().size(); }
  double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  int index_of(const std::string& name) const;
  /// Throws kInvalidArgument for an unknown channel.
  const std::vector<double>& channel(const std::string& name) const;
  void add_channel(std::string name);
};

}  // namespace freqstab
