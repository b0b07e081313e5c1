#pragma once

#include <stdexcept>
#include <string>

namespace afgn {

// Invalid argument, broken invariant, or contract violation.
class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& what) : std::runtime_error(what) {}
};

// Tensor shape disagreement; message carries the dimension report.
class ShapeError : public ValueError {
 public:
  explicit ShapeError(const std::string& what) : ValueError(what) {}
};

// Bad run configuration (rejected before touching any data).
class ConfigError : public ValueError {
 public:
  explicit ConfigError(const std::string& what) : ValueError(what) {}
};

// Missing, truncated, or malformed file.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace afgn
