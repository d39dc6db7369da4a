#pragma once

#include <stdexcept>
#include <string>

namespace telic {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched lengths, alphabets or families.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A policy or environment table has no entry for a requested history prefix.
class UndefinedConditional : public Error {
public:
    UndefinedConditional(const std::string& table, std::string prefix)
        : Error("undefined conditional in " + table + " for prefix [" + prefix + "]"),
          prefix_(std::move(prefix)) {}

    const std::string& prefix() const noexcept { return prefix_; }

private:
    std::string prefix_;
};

/// Enumeration of an experience space would exceed the configured cap.
class SizingError : public Error {
public:
    SizingError(const std::string& what, double required, double cap)
        : Error(what), required_(required), cap_(cap) {}

    double required() const noexcept { return required_; }
    double cap() const noexcept { return cap_; }

private:
    double required_;
    double cap_;
};

/// A target state cannot be reached inside the support of the base distribution.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Non-finite gradients, divergence, or solver failures.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Invalid argument or violated precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace telic
