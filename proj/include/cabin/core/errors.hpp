#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cabin {

/// Base for every error raised by the cabin libraries.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text that is not well-formed (JSON, CSV fields, numbers).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input with the wrong shape: missing keys, wrong types,
/// payload/source mismatch, header mismatch.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A value outside its domain (range checks, forbidden characters).
class ValidationError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class ReplayError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& what, std::size_t rows_written = 0)
        : Error(what), rows_written_(rows_written) {}

    std::size_t rows_written() const noexcept { return rows_written_; }

private:
    std::size_t rows_written_;
};

class StateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

} // namespace cabin
