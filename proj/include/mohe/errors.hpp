#pragma once

#include <stdexcept>
#include <string>

namespace mohe {

// Bad model/config wiring: mismatched shapes at build time, invalid settings.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad data handed to an operation (malformed records, out-of-range labels).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: backward on a non-scalar, forward before params are built.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure: NaN/Inf produced by an op, diverging iteration.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mohe
