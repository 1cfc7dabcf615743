#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace llnlab {

/// Failure categories shared by every module. The CLI maps them to exit codes.
enum class ErrorKind {
  invalid_params,
  unknown_kind,
  horizon_overflow,
  moments_unavailable,
  negative_variance,
  insufficient_replications,
  nonmonotone_tail,
  negativity_detected,
  sup_exceeded,
  nonfinite_mean,
  horizon_mismatch,
  checkpoint_unsorted,
  empty_condition,
  n_too_large,
  tolerance_not_met,
  nonfinite_integrand,
  config_invalid,
  io_error,
  task_failed,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace llnlab
