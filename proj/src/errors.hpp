#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace eigenflow {

// Coarse classification used at the C boundary and for CLI exit codes.
enum class ErrorCode : int {
  config = 1,   // bad configuration or invalid request
  numeric = 2,  // solver failure, degenerate geometry, non-convergence
  io = 3,       // file system or parse problems
};

// Single exception type; `kind` names the specific failure so callers and
// tests can match without a class per condition.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message),
        code_(code),
        kind_(std::move(kind)) {}

  ErrorCode code() const { return code_; }
  const std::string& kind() const { return kind_; }

  static Error parse(const std::string& m) { return {ErrorCode::io, "ParseError", m}; }
  static Error io(const std::string& m) { return {ErrorCode::io, "IoError", m}; }
  static Error topology(const std::string& m) { return {ErrorCode::numeric, "TopologyError", m}; }
  static Error degenerate_triangle(const std::string& m) { return {ErrorCode::numeric, "DegenerateTriangle", m}; }
  static Error no_boundary(const std::string& m) { return {ErrorCode::config, "NoBoundary", m}; }
  static Error no_convergence(const std::string& m) { return {ErrorCode::numeric, "NoConvergence", m}; }
  static Error cluster_too_large(const std::string& m) { return {ErrorCode::numeric, "ClusterTooLarge", m}; }
  static Error lp_failure(const std::string& m) { return {ErrorCode::numeric, "LPFailure", m}; }
  static Error empty_ball(const std::string& m) { return {ErrorCode::config, "EmptyBall", m}; }
  static Error ball_too_small(const std::string& m) { return {ErrorCode::config, "BallTooSmall", m}; }
  static Error step_underflow(const std::string& m) { return {ErrorCode::numeric, "StepUnderflow", m}; }
  static Error degenerate_eigenvalue(const std::string& m) { return {ErrorCode::numeric, "DegenerateEigenvalue", m}; }
  static Error normalization(const std::string& m) { return {ErrorCode::numeric, "NormalizationFailure", m}; }
  static Error endpoint_not_critical(const std::string& m) { return {ErrorCode::config, "EndpointNotCritical", m}; }
  static Error config(const std::string& m) { return {ErrorCode::config, "ConfigError", m}; }
  static Error invalid(const std::string& m) { return {ErrorCode::config, "InvalidArgument", m}; }

 private:
  ErrorCode code_;
  std::string kind_;
};

}  // namespace eigenflow
