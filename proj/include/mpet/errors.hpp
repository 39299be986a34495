#pragma once

#include <stdexcept>
#include <string>

namespace mpet {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched vector/matrix/space dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid argument value (out-of-range index, bad enum, point outside mesh, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Physical parameter outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Factorization hit a (numerically) singular pivot.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}

    double last_residual() const { return last_residual_; }

private:
    double last_residual_;
};

/// Conflicting or malformed Dirichlet constraints.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// Problems reading a config file or data file.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace mpet
