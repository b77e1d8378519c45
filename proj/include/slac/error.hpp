#pragma once

#include <stdexcept>
#include <string>

namespace slac {

// Base for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed configuration or file contents (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Bad input data, e.g. a corrupt CSV row (CLI exit code 2).
struct DataError : Error {
    using Error::Error;
};

// A pipeline stage was invoked before its inputs exist or with too little
// data to proceed (CLI exit code 3).
struct PreconditionError : Error {
    using Error::Error;
};

// Tensor shape mismatch; message names the offending shapes.
struct ShapeError : Error {
    using Error::Error;
};

// A numeric op produced NaN or Inf.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace slac
