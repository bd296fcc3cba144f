#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace combodose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGrid : public Error {
 public:
  using Error::Error;
};

// Dose outside the standardized square.
class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class InitializationFailure : public Error {
 public:
  using Error::Error;
};

class OffGridError : public Error {
 public:
  using Error::Error;
};

class NoAdmissibleDose : public Error {
 public:
  using Error::Error;
};

// Configuration or input-file validation failure. Carries the offending
// field names so callers (CLI, HTTP API) can report them.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> fields = {})
      : Error(what), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

}  // namespace combodose
