#ifndef MTGP_ERRORS_HPP
#define MTGP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mtgp {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition violation (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file: carries the offending row and column when known.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, long row = -1, std::string column = {})
        : ConfigError(what), row_(row), column_(std::move(column)) {}

    long row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    long row_;
    std::string column_;
};

/// Data violates a domain invariant (e.g. treatment outside {0,1}).
class ValidationError : public ConfigError {
public:
    ValidationError(const std::string& what, long row = -1)
        : ConfigError(what), row_(row) {}

    long row() const noexcept { return row_; }

private:
    long row_;
};

/// Matrix or vector dimensions do not agree.
class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Factorization or optimization failure (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (exit code 4).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mtgp

#endif  // MTGP_ERRORS_HPP
