// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace av2v {

// Error taxonomy for the whole library. Every failure thrown out of a
// public entry point is one of these; the C API maps them onto status
// codes and the CLI maps those onto exit codes.
enum class ErrorCode {
  kernel_domain,  // bad values/shapes at a dense-kernel boundary
  config,         // invalid or inconsistent run configuration
  step_order,     // timestep arguments out of order
  conditioning,   // conditioning tensor does not match the latent
  plan,           // malformed injection plan
  cache,          // feature-cache misuse (duplicate write, early read)
  cache_miss,     // planned injection site with no recorded feature
  pipeline,       // orchestration-level contract violation
  divergence,     // non-finite latent produced during a run
  format,         // on-disk format violation
  io,             // filesystem failure
  metric,         // metric preconditions violated
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct KernelError : Error {
  explicit KernelError(const std::string& m) : Error(ErrorCode::kernel_domain, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCode::config, m) {}
};
struct StepOrderError : Error {
  explicit StepOrderError(const std::string& m) : Error(ErrorCode::step_order, m) {}
};
struct ConditioningError : Error {
  explicit ConditioningError(const std::string& m) : Error(ErrorCode::conditioning, m) {}
};
struct PlanError : Error {
  explicit PlanError(const std::string& m) : Error(ErrorCode::plan, m) {}
};
struct CacheError : Error {
  explicit CacheError(const std::string& m) : Error(ErrorCode::cache, m) {}
};
struct CacheMissError : Error {
  explicit CacheMissError(const std::string& m) : Error(ErrorCode::cache_miss, m) {}
};
struct PipelineError : Error {
  explicit PipelineError(const std::string& m) : Error(ErrorCode::pipeline, m) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& m) : Error(ErrorCode::divergence, m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error(ErrorCode::format, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCode::io, m) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& m) : Error(ErrorCode::metric, m) {}
};

}  // namespace av2v
