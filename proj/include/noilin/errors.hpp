#pragma once

#include <stdexcept>
#include <string>

namespace noilin {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or precondition on user-supplied parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required (NaN loss, NaN gradient).
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed data files. Each failure mode has its own type so callers and
// tests can tell them apart.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
public:
    using FormatError::FormatError;
};

class CountMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace noilin
