#ifndef BRWS_ERRORS_HPP
#define BRWS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace brws {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct NumericsError : Error {
    using Error::Error;
};

// "moment diverges": an exponential moment came back non-finite or is
// empirically unbounded. Never silently reported as infinity.
struct MomentDiverges : NumericsError {
    using NumericsError::NumericsError;
};

// Bracketing scan found no sign change for theta* (boundary normalization).
struct NoBoundaryNormalization : NumericsError {
    using NumericsError::NumericsError;
};

struct BracketFailure : NumericsError {
    using NumericsError::NumericsError;
};

struct EnumerationTooLarge : Error {
    using Error::Error;
};

struct CapacityExceeded : Error {
    using Error::Error;
};

struct IncompatibleRegimes : Error {
    using Error::Error;
};

}  // namespace brws

#endif
