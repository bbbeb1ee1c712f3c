#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace usddps {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something outside an operation's domain (too short,
// wrong channel count, bad configuration value).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but numerically degenerate (all zeros, zero variance).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Operands whose shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::size_t position)
      : Error(what + " (at byte " + std::to_string(position) + ")"),
        position_(position) {}
  explicit IoError(const std::string& what) : Error(what) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_ = 0;
};

// Sampler state became non-finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace usddps
