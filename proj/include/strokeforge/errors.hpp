#pragma once

#include <stdexcept>
#include <string>

namespace strokeforge {

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Spatial geometry cannot be realized exactly (odd pooling extent, stride
/// that does not tile, UNet depth that does not divide the image).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value fell outside the domain of a function (log of a non-positive,
/// division by zero).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration value or malformed config document.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or out-of-contract input data (too few frames, non-finite
/// intensities, non-binary mask).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace strokeforge
