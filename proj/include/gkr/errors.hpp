#pragma once

#include <stdexcept>
#include <string>

namespace gkr {

/// Operand shapes do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API was called outside its contract (empty batch, loss not on tape, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input value outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file. The message carries the path and line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric failure during training or checking (NaN loss, failed gradient check).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gkr
