#pragma once

#include <stdexcept>
#include <string>

namespace qthermo {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Squeezing strength outside the open interval |gamma| < omega/2.
class NotDiagonalizable : public Error {
public:
    using Error::Error;
};

class StateValidityError : public Error {
public:
    using Error::Error;
};

/// A transition matrix or process that is not (column-)stochastic / unitary.
class ProcessValidityError : public Error {
public:
    using Error::Error;
};

/// Least-squares basis with near-duplicate frequencies.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double first, double second)
        : Error(what), first_(first), second_(second) {}

    double first() const noexcept { return first_; }
    double second() const noexcept { return second_; }

private:
    double first_;
    double second_;
};

/// Field energy reached the edge of the simulation window.
class WindowError : public Error {
public:
    using Error::Error;
};

/// Truncation loop exhausted its dimension budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace qthermo
