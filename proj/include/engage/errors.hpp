#pragma once

#include <stdexcept>
#include <string>

namespace engage {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument to an operation (bad window length, wrong arity, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

// A window that overlaps no schedule span.
class CoverageError : public Error {
public:
    using Error::Error;
};

// Evaluation protocol cannot be applied (too few students, missing class).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// A metrics report would be incomplete.
class ReportError : public Error {
public:
    using Error::Error;
};

// File content that cannot be parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public ParseError {
public:
    using ParseError::ParseError;
};

} // namespace engage
