#pragma once

#include <stdexcept>
#include <string>

namespace normlab {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer extents that do not chain.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf in an activation, gradient or loss, or a degenerate quantity
/// (zero norm, non-positive variance, divergence).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated input file, checkpoint or table.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Invalid argument, configuration value or precondition.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace normlab
