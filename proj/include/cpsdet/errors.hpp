#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpsdet {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/vector dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

// A precondition on an operation's inputs was violated.
struct ContractError : Error {
  using Error::Error;
};

// An operation would have produced a non-finite value.
struct NumericError : Error {
  using Error::Error;
};

// File I/O failure; message carries the path.
struct IoError : Error {
  using Error::Error;
};

// Malformed input file; carries a 1-based row/column location.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(column) + ")"),
        row(row),
        column(column) {}

  std::size_t row;
  std::size_t column;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
  explicit DivergenceError(std::size_t epoch)
      : Error("training diverged: non-finite loss at epoch " +
              std::to_string(epoch)),
        epoch(epoch) {}

  std::size_t epoch;
};

}  // namespace cpsdet
