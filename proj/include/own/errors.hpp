#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace own {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise out-of-domain values.
class ValueError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  RankError(const std::string& what, std::size_t column)
      : Error(what), column_(column) {}
  explicit RankError(const std::string& what) : Error(what) {}

  // Offending column (or row, for row-space checks); npos when not applicable.
  std::size_t column() const { return column_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t column_ = npos;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised by training code when the loss or a gradient stops being finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace own
