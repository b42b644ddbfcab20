#pragma once

#include <stdexcept>
#include <string>

namespace hpsmp {

/// Shape or axis mismatch between tensors (wrong kernel width, misaligned
/// matmul axes, ...). Messages name the offending axis.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition of an operation was violated (non-scalar loss, bad split
/// boundaries, insufficient universe, ...).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file: carries file/line context where available.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Semantically invalid data (duplicate price dates, non-positive prices,
/// missing scores for a trading day, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values or diverging numerics.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hpsmp
