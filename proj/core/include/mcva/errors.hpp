#pragma once

#include <stdexcept>
#include <string>

namespace mcva {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor extents do not match what an operation requires.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid configuration value or malformed config file.
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericalError : Error {
    using Error::Error;
};

// Malformed on-disk container (PPM, .flo, checkpoint).
struct FormatError : Error {
    using Error::Error;
};

// Dataset directory missing files or labels.
struct DatasetError : Error {
    using Error::Error;
};

// Training loss became non-finite.
struct DivergedError : Error {
    using Error::Error;
};

// Attention over an empty key set.
struct EmptyKeySet : Error {
    using Error::Error;
};

// Every tokenized cost-map cell of a source pixel was masked out.
struct AllTokensMasked : Error {
    using Error::Error;
};

} // namespace mcva
