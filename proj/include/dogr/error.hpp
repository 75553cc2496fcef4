#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace dogr {

/// Base class of every error raised by the library. The CLI maps these to
/// exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised for invalid dataset contents (non-finite values, duplicate names).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A covariance matrix could not be Cholesky-factorized.
class FactorizationError : public Error {
 public:
  explicit FactorizationError(const std::string& what,
                              std::optional<std::size_t> component = std::nullopt)
      : Error(component ? what + " (component " + std::to_string(*component) + ")" : what),
        component_(component) {}

  std::optional<std::size_t> component() const { return component_; }

 private:
  std::optional<std::size_t> component_;
};

/// The weighted design matrix of a least-squares problem is rank deficient.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

/// All regression weights are zero (or some are negative).
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

/// A mixture component's responsibility mass fell below the configured floor.
class DegenerateComponentError : public Error {
 public:
  DegenerateComponentError(std::size_t component, double mass)
      : Error("component " + std::to_string(component) + " collapsed (responsibility mass " +
              std::to_string(mass) + ")"),
        component_(component),
        mass_(mass) {}

  std::size_t component() const { return component_; }
  double mass() const { return mass_; }

 private:
  std::size_t component_;
  double mass_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// EM could not continue; carries the iteration at which it gave up.
class FitError : public Error {
 public:
  FitError(int iteration, const std::string& what)
      : Error("EM failed at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

class CsvError : public Error {
 public:
  enum class Kind { io, empty_file, malformed, missing_column, non_numeric };

  CsvError(Kind kind, const std::string& what, std::size_t row = 0, std::string column = {})
      : Error(what), kind_(kind), row_(row), column_(std::move(column)) {}

  Kind kind() const { return kind_; }
  /// 1-based data row (header excluded); 0 when not row specific.
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  Kind kind_;
  std::size_t row_;
  std::string column_;
};

}  // namespace dogr
