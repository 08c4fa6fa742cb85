#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amrl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value appeared while integrating the equations of motion.
class SimulationFault : public Error {
 public:
  explicit SimulationFault(std::string field)
      : Error("simulation fault: non-finite value in '" + field + "'"), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class InfeasibleTrim : public Error {
 public:
  using Error::Error;
};

class UndefinedGamma : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Row is 1-based over data rows (0 when not row specific).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::string column)
      : Error(format(what, row, column)), row_(row), column_(std::move(column)) {}
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, const std::string& column) {
    std::string msg = "parse error";
    if (row > 0) msg += " at row " + std::to_string(row);
    if (!column.empty()) msg += ", column '" + column + "'";
    return msg + ": " + what;
  }
  std::size_t row_;
  std::string column_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class OptimizerFault : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during a SAC update; carries the loss name.
class TrainingFault : public Error {
 public:
  explicit TrainingFault(std::string loss)
      : Error("training fault: non-finite " + loss), loss_(std::move(loss)) {}
  const std::string& loss() const noexcept { return loss_; }

 private:
  std::string loss_;
};

class CheckpointError : public Error {
 public:
  CheckpointError(const std::string& what, std::string field)
      : Error("checkpoint error (" + field + "): " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace amrl
