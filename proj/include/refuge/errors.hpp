#pragma once

#include <stdexcept>
#include <string>

namespace refuge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid grid or refuge layout.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// Model parameter outside its admissible range.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// Holling-II denominator 1 + m u collapsed to (or below) zero.
class SingularResponseError : public Error {
public:
  using Error::Error;
};

/// Linear solve or eigen-iteration failure.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Branch seed outside the asymptotic regime (u forced non-positive).
class GuessError : public Error {
public:
  using Error::Error;
};

/// Not enough branch data for an onset estimate or comparison.
class EstimationError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File-system failure while writing results.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace refuge
