#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fracfilt {

/// Operand dimensions do not agree with what an operation requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sample window or filter support falls outside the available plane.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// NaN or Inf where a finite value is required.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file or stream. `position` is a byte offset for binary
/// formats and a 1-based line number for text formats.
class ParseError : public std::runtime_error {
 public:
  enum class Unit { Byte, Line };

  ParseError(const std::string& what, std::uint64_t position, Unit unit)
      : std::runtime_error(format(what, position, unit)), position_(position), unit_(unit) {}

  std::uint64_t position() const noexcept { return position_; }
  Unit unit() const noexcept { return unit_; }

 private:
  static std::string format(const std::string& what, std::uint64_t position, Unit unit) {
    return what + (unit == Unit::Byte ? " (at byte offset " : " (at line ") + std::to_string(position) +
           ")";
  }

  std::uint64_t position_;
  Unit unit_;
};

}  // namespace fracfilt
