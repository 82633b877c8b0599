#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mstpp {

/// Base for every error raised by the library. The CLI maps subclasses
/// onto exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not match the expected file format.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data contract (ordering, extent, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OutOfDomain : public DataError {
 public:
  OutOfDomain(double x, double y)
      : DataError("position (" + std::to_string(x) + ", " + std::to_string(y) +
                  ") is outside the raster extent"),
        x_(x), y_(y) {}
  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }

 private:
  double x_, y_;
};

class NoData : public DataError {
 public:
  NoData(double x, double y, const std::string& layer)
      : DataError("position (" + std::to_string(x) + ", " + std::to_string(y) +
                  ") falls on a nodata cell of layer '" + layer + "'"),
        x_(x), y_(y), layer_(layer) {}
  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  const std::string& layer() const noexcept { return layer_; }

 private:
  double x_, y_;
  std::string layer_;
};

class DegenerateLayer : public DataError {
 public:
  using DataError::DataError;
};

class NoValidCells : public DataError {
 public:
  using DataError::DataError;
};

/// Linear / inverse-linear selection evaluated where w'theta <= 0.
/// step and slot are 1-based when known, 0 otherwise.
class NonPositiveSelection : public Error {
 public:
  NonPositiveSelection(double eta, std::size_t step = 0, std::size_t slot = 0)
      : Error("selection function requires w'theta > 0, got " + std::to_string(eta) +
              (step ? " at step " + std::to_string(step) + ", slot " + std::to_string(slot)
                    : std::string())),
        eta_(eta), step_(step), slot_(slot) {}
  double eta() const noexcept { return eta_; }
  std::size_t step() const noexcept { return step_; }
  std::size_t slot() const noexcept { return slot_; }

 private:
  double eta_;
  std::size_t step_, slot_;
};

class RejectionExhausted : public Error {
 public:
  using Error::Error;
};

class EnumerationTooLarge : public Error {
 public:
  using Error::Error;
};

class NonFiniteTrajectory : public Error {
 public:
  using Error::Error;
};

class InitializationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace mstpp
