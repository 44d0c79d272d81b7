#pragma once

#include <stdexcept>
#include <string>

namespace boxrefine {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input file could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace boxrefine
