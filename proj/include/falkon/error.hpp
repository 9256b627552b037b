#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace falkon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what)
      : Error("dimension mismatch: " + what) {}
};

/// A worker tried to hold more scratch than its budget allows.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Raised by the tiled Cholesky when a pivot tile is not positive definite.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::size_t block_column)
      : Error("matrix is not positive definite (failing block column " +
              std::to_string(block_column) + ")"),
        block_column_(block_column) {}

  std::size_t block_column() const noexcept { return block_column_; }

 private:
  std::size_t block_column_;
};

/// No work-table counter advanced within the configured timeout.
class DeadlockError : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t iteration)
      : Error("conjugate gradient diverged (non-finite value at iteration " +
              std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class LossContractViolation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace falkon
