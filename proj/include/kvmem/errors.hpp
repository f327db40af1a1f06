#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kvmem {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes, grids or time steps of two operands do not match.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A precondition on the input data is violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Data assumption (A1)-(A5) / (H1)-(H5) failed.
class AssumptionError : public Error {
public:
    AssumptionError(std::string assumption, const std::string& what)
        : Error(what), assumption_(std::move(assumption)) {}
    const std::string& assumption() const { return assumption_; }

private:
    std::string assumption_;
};

/// Time integration blew up (NaN or unbounded growth).
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : Error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// Junction mismatch while gluing two windows.
class GlueError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace kvmem
