#include "llnlab/error.hpp"

namespace llnlab {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_params: return "invalid-params";
    case ErrorKind::unknown_kind: return "unknown-kind";
    case ErrorKind::horizon_overflow: return "horizon-overflow";
    case ErrorKind::moments_unavailable: return "moments-unavailable";
    case ErrorKind::negative_variance: return "negative-variance";
    case ErrorKind::insufficient_replications: return "insufficient-replications";
    case ErrorKind::nonmonotone_tail: return "nonmonotone-tail";
    case ErrorKind::negativity_detected: return "negativity-detected";
    case ErrorKind::sup_exceeded: return "sup-exceeded";
    case ErrorKind::nonfinite_mean: return "nonfinite-mean";
    case ErrorKind::horizon_mismatch: return "horizon-mismatch";
    case ErrorKind::checkpoint_unsorted: return "checkpoint-unsorted";
    case ErrorKind::empty_condition: return "empty-condition";
    case ErrorKind::n_too_large: return "n-too-large";
    case ErrorKind::tolerance_not_met: return "tolerance-not-met";
    case ErrorKind::nonfinite_integrand: return "nonfinite-integrand";
    case ErrorKind::config_invalid: return "config-invalid";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::task_failed: return "task-failed";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace llnlab
