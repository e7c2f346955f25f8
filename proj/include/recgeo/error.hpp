#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recgeo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Binary or tabular file content that does not match its declared layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised by the trainer when a loss or parameter stops being finite.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long epoch, long batch, long example)
      : Error(what), epoch_(epoch), batch_(batch), example_(example) {}

  long epoch() const noexcept { return epoch_; }
  long batch() const noexcept { return batch_; }
  long example() const noexcept { return example_; }

 private:
  long epoch_;
  long batch_;
  long example_;
};

}  // namespace recgeo
