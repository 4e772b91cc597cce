#include "error.hpp"

namespace freqstab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kSingularResolvent: return "singular-resolvent";
    case ErrorCode::kSingularAdmittance: return "singular-admittance";
    case ErrorCode::kOperatingPointMismatch: return "operating-point-mismatch";
    case ErrorCode::kNoConvergence: return "no-convergence";
    case ErrorCode::kGridMismatch: return "grid-mismatch";
    case ErrorCode::kPointOnCurve: return "point-on-curve";
    case ErrorCode::kMarginalCase: return "marginal-case";
    case ErrorCode::kOpenLoopUnstable: return "open-loop-unstable";
    case ErrorCode::kEigenNoConvergence: return "eigen-no-convergence";
    case ErrorCode::kStepTooLarge: return "step-too-large";
    case ErrorCode::kNoDominantTone: return "no-dominant-tone";
    case ErrorCode::kIllConditioned: return "ill-conditioned";
    case ErrorCode::kConfigInvalid: return "config-invalid";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_config_error(ErrorCode code) noexcept {
  return code == ErrorCode::kConfigInvalid || code == ErrorCode::kInvalidArgument ||
         code == ErrorCode::kIo;
}

}  // namespace freqstab
