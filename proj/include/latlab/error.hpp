#pragma once

#include <stdexcept>
#include <string>

namespace latlab {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed files, shape mismatches, invalid configuration values.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite values, diverging losses, unresolvable numeric degeneracies.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Bad command-line invocations.
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

}  // namespace latlab
