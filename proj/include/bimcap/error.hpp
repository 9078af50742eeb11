#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bimcap {

enum class ErrorCode {
  invalid_argument,
  invalid_spec,
  invalid_scene,
  parse,
  io,
  config,
  degenerate_input,
  empty_plan,
  association,
  calibration_failure,
  numeric,
  empty_problem,
  metric_undefined,
};

std::string_view error_code_name(ErrorCode code);

// Process exit code used by the CLI for a given error category.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bimcap
