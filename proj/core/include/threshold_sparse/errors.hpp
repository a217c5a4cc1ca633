#pragma once

#include <stdexcept>
#include <string>

namespace threshold_sparse {

/// Bad argument to a library call (dimension mismatch, out-of-range scalar, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data could not be parsed or violates a Dataset invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinity appeared inside a solver iterate.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyGridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config key unknown, missing or unparseable. `key()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Too many failed replications, or no usable grid point.
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace threshold_sparse
