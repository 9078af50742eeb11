#include <string>

#include "bimcap/error.hpp"
#include "bimcap/semantic.hpp"

namespace bimcap {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_spec: return "invalid_spec";
    case ErrorCode::invalid_scene: return "invalid_scene";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::io: return "io_error";
    case ErrorCode::config: return "config_error";
    case ErrorCode::degenerate_input: return "degenerate_input";
    case ErrorCode::empty_plan: return "empty_plan";
    case ErrorCode::association: return "association_error";
    case ErrorCode::calibration_failure: return "calibration_failure";
    case ErrorCode::numeric: return "numeric_error";
    case ErrorCode::empty_problem: return "empty_problem";
    case ErrorCode::metric_undefined: return "metric_undefined";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::invalid_argument:
    case ErrorCode::invalid_spec:
      return 2;
    case ErrorCode::io:
    case ErrorCode::parse:
    case ErrorCode::invalid_scene:
      return 3;
    case ErrorCode::degenerate_input:
    case ErrorCode::association:
    case ErrorCode::calibration_failure:
    case ErrorCode::numeric:
      return 4;
    case ErrorCode::empty_plan:
    case ErrorCode::empty_problem:
    case ErrorCode::metric_undefined:
      return 5;
  }
  return 1;
}

std::string_view class_name(SemanticClass c) {
  switch (c) {
    case SemanticClass::wall: return "wall";
    case SemanticClass::column: return "column";
    case SemanticClass::floor: return "floor";
    case SemanticClass::ceiling: return "ceiling";
    case SemanticClass::window: return "window";
    case SemanticClass::door: return "door";
    case SemanticClass::other: return "other";
  }
  return "other";
}

std::optional<SemanticClass> parse_class(std::string_view name) {
  for (SemanticClass c : kAllSemanticClasses) {
    if (class_name(c) == name) return c;
  }
  if (name == "clutter") return SemanticClass::other;
  return std::nullopt;
}

std::optional<SemanticClass> class_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumSemanticClasses)) return std::nullopt;
  return static_cast<SemanticClass>(index);
}

}  // namespace bimcap
