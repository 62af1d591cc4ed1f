#pragma once

#include <stdexcept>
#include <string>

namespace har {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or infeasible configuration. CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (non-finite samples, bad rows, corrupt files).
class InputError : public Error {
public:
    using Error::Error;
};

/// A runtime invariant was violated. CLI exit code 3.
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace har
