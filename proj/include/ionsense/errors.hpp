#pragma once

#include <stdexcept>
#include <string>

namespace ionsense {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or precondition violation (bad frequency, empty sample set, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A fit that cannot proceed or did not produce a usable optimum.
class FitError : public Error {
public:
    using Error::Error;
};

/// Data that is structurally unusable (missing frames, too few OFF points, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Filesystem or serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace ionsense
