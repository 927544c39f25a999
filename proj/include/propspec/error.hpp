#pragma once

#include <stdexcept>
#include <string>

namespace propspec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (AAIndex flat file, CSV, JSON bundle).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Training data that no model can be fit to (single class, constant target, ...).
class DegenerateData : public Error {
public:
    using Error::Error;
};

/// An internal invariant does not hold; indicates a bug or corrupted input.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

} // namespace propspec
