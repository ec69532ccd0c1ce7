#pragma once

#include <stdexcept>
#include <string>

namespace echoprint {

// Process exit codes used by the CLI. Every library exception maps onto one.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kProtocol = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad parameters, bad config files, out-of-range options.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

// Problems with input data: files, shapes, numeric domains.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedCodecError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class DomainError : public DataError {
 public:
  using DataError::DataError;
};

class TooShortError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

class NoFingerprintError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateGeometryError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyNegativesError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public DataError {
 public:
  using DataError::DataError;
};

// Evaluation protocol violations (e.g. too few traces for a k-fold split).
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ExitCode::kProtocol, what) {}
};

}  // namespace echoprint
