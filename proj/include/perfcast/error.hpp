#pragma once

#include <stdexcept>
#include <string>

namespace perfcast {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad CSV rows, bad JSON, unknown names.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::string column = {})
        : Error(format(what, line, column)), line_(line), column_(std::move(column)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, const std::string& column) {
        std::string msg;
        if (line > 0) msg += "line " + std::to_string(line) + ": ";
        if (!column.empty()) msg += "column '" + column + "': ";
        return msg + what;
    }

    std::size_t line_;
    std::string column_;
};

/// Data does not satisfy a modeling precondition (too few rows, degenerate predictor, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical fitting failed (non-convergence, singular system).
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace perfcast
