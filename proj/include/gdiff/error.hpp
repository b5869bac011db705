#pragma once

#include <stdexcept>
#include <string>

namespace gdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid graph construction or a graph that violates the category invariants.
class GraphError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when the error is not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Shape or category-space mismatch between collaborating objects.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: impossible transitions, non-finite activations, divergence.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or schema violation.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace gdiff
