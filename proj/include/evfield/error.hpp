#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evf {

// Precondition violated by the caller (bad sizes, non-positive depth, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inputs are well formed but carry no usable information
// (zero-variance patch, collinear points, static scan mirror).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content. `offset` is a byte offset, line number or record
// index depending on the format; the message says which.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace evf
