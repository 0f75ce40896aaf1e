#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tlcause {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input data: CSV content, mismatched series, unknown atoms.
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not produce a result (rank deficiency,
/// degenerate range, zero variance).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Syntax or validation error in formula text. Carries the 1-based
/// position of the offending token and, optionally, the name of the source
/// it was read from.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column, std::string token,
               const std::string& source = {})
        : Error(format(message, line, column, token, source)),
          message_(message),
          line_(line),
          column_(column),
          token_(std::move(token)) {}

    [[nodiscard]] const std::string& message() const noexcept { return message_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }
    [[nodiscard]] const std::string& token() const noexcept { return token_; }

private:
    static std::string format(const std::string& message, std::size_t line, std::size_t column,
                              const std::string& token, const std::string& source) {
        std::string out = (source.empty() ? "" : source + ":") + std::to_string(line) + ":" + std::to_string(column) + ": " + message;
        if (!token.empty()) {
            out += " (at '" + token + "')";
        }
        return out;
    }

    std::string message_;
    std::size_t line_;
    std::size_t column_;
    std::string token_;
};

}  // namespace tlcause
