#pragma once

#include <stdexcept>
#include <string>

namespace trinity {

// Base class for all errors raised by the library. Messages are single-line
// and name the offending quantity (shape, path, key, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/axis mismatches and invalid dimensions.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error("dimension error: " + msg) {}
};

// API misuse: a precondition that is not about raw shapes (role mismatch,
// empty channel, double backward, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error("contract error: " + msg) {}
};

// Bad numeric or label content (NaN cost, out-of-range class index, ...).
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& msg) : Error("value error: " + msg) {}
};

// Malformed file content.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// Filesystem failures; message names the path.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace trinity
