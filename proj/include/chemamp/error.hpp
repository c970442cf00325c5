// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chemamp {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kToolFailure = 4,
};

/// Root of the library's exception hierarchy. Each error carries the exit
/// code the CLI reports when it escapes a command.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfig) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::kData) {}
};

/// A failed tool invocation (nonzero exit, timeout, bad HTTP status, protocol
/// violation by a remote planner).
class ToolFailure : public Error {
 public:
  explicit ToolFailure(const std::string& what) : Error(what, ExitCode::kToolFailure) {}
};

class LookupError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class RegistrationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TemplateError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ProtocolError : public ToolFailure {
 public:
  using ToolFailure::ToolFailure;
};

class TransportError : public ToolFailure {
 public:
  using ToolFailure::ToolFailure;
};

/// Name-string parse failure; `position` is the byte offset of the offending
/// character.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : DataError(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace chemamp
