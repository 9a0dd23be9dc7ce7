#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mutare {

enum class ErrorKind {
  argument,     // invalid parameters or options
  data,         // malformed or unsupported input data
  singular,     // rank-deficient design or information matrix
  convergence,  // iterative method hit its cap
  budget,       // branch-and-bound node budget exhausted
  numeric,      // non-finite intermediate values
};

/// Base error for the library. The stage list is filled in as the error
/// propagates through the fitting pipeline ("pilot", "select", ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }
  const std::vector<std::string>& stages() const noexcept { return stages_; }

  void add_stage(const std::string& stage);
  const char* what() const noexcept override { return full_.c_str(); }

  bool is_numeric() const noexcept {
    return kind_ == ErrorKind::singular || kind_ == ErrorKind::convergence ||
           kind_ == ErrorKind::budget || kind_ == ErrorKind::numeric;
  }

 private:
  ErrorKind kind_;
  std::string message_;
  std::vector<std::string> stages_;
  std::string full_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message)
      : Error(ErrorKind::argument, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error(ErrorKind::numeric, message) {}
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& message, std::vector<int> columns)
      : Error(ErrorKind::singular, message), columns_(std::move(columns)) {}
  const std::vector<int>& columns() const noexcept { return columns_; }

 private:
  std::vector<int> columns_;
};

/// Carries the best point reached before the iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, std::vector<double> best_point)
      : Error(ErrorKind::convergence, message), best_point_(std::move(best_point)) {}
  const std::vector<double>& best_point() const noexcept { return best_point_; }

 private:
  std::vector<double> best_point_;
};

}  // namespace mutare
