#pragma once

#include <stdexcept>
#include <string>

namespace rock {

// The numeric values are the CLI exit codes.
enum class ErrorClass : int { Config = 2, Backend = 3, Data = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), class_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return class_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass class_;
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string kind = "ConfigError")
      : Error(ErrorClass::Config, std::move(kind), message) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& message, std::string kind = "BackendError")
      : Error(ErrorClass::Backend, std::move(kind), message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message, std::string kind = "DataError")
      : Error(ErrorClass::Data, std::move(kind), message) {}
};

class PreconditionError : public ConfigError {
 public:
  explicit PreconditionError(const std::string& message) : ConfigError(message, "PreconditionError") {}
};

class LatticeViolation : public ConfigError {
 public:
  explicit LatticeViolation(const std::string& message) : ConfigError(message, "LatticeViolation") {}
};

class BackendUnavailable : public BackendError {
 public:
  BackendUnavailable(std::string endpoint, int attempts, const std::string& detail)
      : BackendError(endpoint + " failed after " + std::to_string(attempts) + " attempt(s): " + detail,
                     "BackendUnavailable"),
        endpoint_(std::move(endpoint)),
        attempts_(attempts) {}

  const std::string& endpoint() const noexcept { return endpoint_; }
  int attempts() const noexcept { return attempts_; }

 private:
  std::string endpoint_;
  int attempts_;
};

class MalformedResponse : public BackendError {
 public:
  explicit MalformedResponse(const std::string& message) : BackendError(message, "MalformedResponse") {}
};

class RequestRejected : public BackendError {
 public:
  RequestRejected(int status, const std::string& message)
      : BackendError("HTTP " + std::to_string(status) + ": " + message, "RequestRejected"), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// A raw score required by a precedence query is absent: the backend fetch
// that built the table did not cover the pair.
class MissingScore : public BackendError {
 public:
  explicit MissingScore(const std::string& pair) : BackendError("no raw score for " + pair, "MissingScore") {}
};

class EmptyCovariates : public DataError {
 public:
  explicit EmptyCovariates(const std::string& message = "covariate set is empty")
      : DataError(message, "EmptyCovariates") {}
};

class EmptyAfterFilter : public DataError {
 public:
  explicit EmptyAfterFilter(const std::string& message = "temporality pre-filter removed every covariate")
      : DataError(message, "EmptyAfterFilter") {}
};

class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& message) : DataError(message, "ParseError") {}
};

class UnknownAttribute : public DataError {
 public:
  explicit UnknownAttribute(const std::string& message) : DataError(message, "UnknownAttribute") {}
};

class WrongColumnCount : public DataError {
 public:
  WrongColumnCount(std::size_t line, std::size_t got, std::size_t want)
      : DataError("line " + std::to_string(line) + ": expected " + std::to_string(want) + " columns, got " +
                      std::to_string(got),
                  "WrongColumnCount"),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SuiteConstructionFailed : public DataError {
 public:
  explicit SuiteConstructionFailed(const std::string& message) : DataError(message, "SuiteConstructionFailed") {}
};

}  // namespace rock
