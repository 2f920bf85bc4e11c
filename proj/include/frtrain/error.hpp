#pragma once

#include <stdexcept>
#include <string>

namespace frtrain {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

// Raised by CSV readers; the message always names the row and column.
class ParseError : public Error {
 public:
  using Error::Error;
};

class UndefinedGroupError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace frtrain
