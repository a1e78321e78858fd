#pragma once

#include <stdexcept>
#include <string>

namespace triplemark {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or degenerate input data (bad CSV, empty table).
class InputError : public Error {
public:
    using Error::Error;
};

/// A parameter vector violates a model invariant.
class ConstraintViolation : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of a function (e.g. N < x0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A closed-form estimator is undefined for the given table (zero cells).
class EstimatorUndefined : public Error {
public:
    using Error::Error;
};

/// Iterative fit failed to converge or the MLE does not exist.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Numerical differentiation produced non-finite values.
class DifferentiationError : public Error {
public:
    explicit DifferentiationError(const std::string& what, int coordinate)
        : Error(what), coordinate_(coordinate) {}

    int coordinate() const noexcept { return coordinate_; }

private:
    int coordinate_;
};

/// Design matrix does not have full column rank.
class DesignError : public Error {
public:
    using Error::Error;
};

}  // namespace triplemark
