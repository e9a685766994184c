#pragma once

#include <stdexcept>
#include <string>

namespace elmer {

// Base for every error raised by the library. The CLI maps ValidationError
// subclasses to exit code 1 and NumericalError subclasses to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Missing or malformed columns in an input file.
class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Unparseable or non-finite cell; message carries the row number.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class IdentifiabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SampleSizeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Zero is not interior to the convex hull of the estimating functions.
class HullFailureError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace elmer
