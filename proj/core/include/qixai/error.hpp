// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qixai {

/// Broad failure category; the CLI maps each one to an exit code.
enum class ErrorKind {
  usage,      // bad arguments or configuration values
  data,       // malformed, missing or inconsistent input data
  io,         // filesystem failures
  numerical,  // an iterative method failed to converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& message)
      : Error(ErrorKind::numerical, message) {}
};

/// Raised by the pipeline: wraps the failing stage's error and keeps its kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// 1 usage, 2 data/io, 3 non-convergence.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace qixai
