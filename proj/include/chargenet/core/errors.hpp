#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chargenet {

/// Operand shapes do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside an operation's domain (empty sequence, single-class labels, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Object used in the wrong lifecycle state (consumed tape, untrained bank, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed external input. `line()` is 1-based, 0 when not line oriented.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A judgement document whose indicator clauses are missing or out of order.
class SegmentationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A decision section that names no known charge.
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file that cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent configuration or specification values.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace chargenet
