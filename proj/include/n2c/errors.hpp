#pragma once

#include <stdexcept>
#include <string>

namespace n2c {

// Process exit codes used by the command line front end.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kFailure; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

// Misuse of an API: shape mismatch, frozen operator update, wrong bundle kind.
class ContractError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

// File level failures. All of them are data errors for the CLI.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class TruncationError : public IoError {
 public:
  using IoError::IoError;
};

class DimensionError : public IoError {
 public:
  using IoError::IoError;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class ManifestError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace n2c
