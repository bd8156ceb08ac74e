#pragma once

#include <stdexcept>
#include <string>

namespace seedplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file header is missing a required column.
class SchemaError : public Error {
public:
    SchemaError(const std::string& column, const std::string& file)
        : Error("schema error: " + file + " is missing column '" + column + "'"), column_(column) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

/// A cell could not be parsed. Row numbers count data rows from 1.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row)
        : Error("parse error at row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DuplicateKeyError : public Error {
public:
    using Error::Error;
};

class ReferentialError : public Error {
public:
    using Error::Error;
};

/// Invalid numeric parameter (negative penalty, out-of-range index, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Failure inside one pipeline stage; the message is prefixed by the stage label.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace seedplan
