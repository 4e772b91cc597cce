#pragma once

#include <json.hpp>
#include <string>

#include "loci.hpp"
#include "timeseries.hpp"

namespace freqstab {

/// Columns: f_Hz, then re/im of each entry in row-major order; 17 significant digits.
std::string samples_to_csv(const TransferSamples& s);
TransferSamples samples_from_csv(const std::string& text);

nlohmann::json samples_to_json(const TransferSamples& s);
TransferSamples samples_from_json(const nlohmann::json& j);

nlohmann::json loci_to_json(const EigenLoci& loci);

/// Columns: t, then one per channel.
std::string timeseries_to_csv(const TimeSeries& ts);

std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace freqstab
