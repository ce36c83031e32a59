#pragma once

#include <stdexcept>
#include <string>

namespace rfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or inconsistent column configuration.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A cell that cannot be parsed as the expected type.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A parsed value outside its allowed domain (e.g. treatment not in {0,1}).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Missing cells found while the missing-data policy is "error".
class MissingValueError : public Error {
 public:
  using Error::Error;
};

/// Growth or fit could not start (e.g. an arm too small at the root).
class FitError : public Error {
 public:
  using Error::Error;
};

/// A prediction row lacks a value the model needs, or does not match the model.
class PredictionError : public Error {
 public:
  using Error::Error;
};

}  // namespace rfit
