#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace freqstab {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kSingularResolvent,
  kSingularAdmittance,
  kOperatingPointMismatch,
  kNoConvergence,
  kGridMismatch,
  kPointOnCurve,
  kMarginalCase,
  kOpenLoopUnstable,
  kEigenNoConvergence,
  kStepTooLarge,
  kNoDominantTone,
  kIllConditioned,
  kConfigInvalid,
  kEmptyDataset,
  kIo,
};

/// Stable, machine-readable name of an error code (e.g. "singular-resolvent").
std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by user input rather than by an analysis.
bool is_config_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace freqstab
