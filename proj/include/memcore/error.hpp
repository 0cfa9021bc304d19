#pragma once

#include <stdexcept>
#include <string>

namespace memcore {

// Every error carries the name of the module that raised it so the CLI can
// report "xbar: ..." and pick an exit code from the error kind.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    [[nodiscard]] const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Evaluation would have pushed a device past its switching threshold.
class OverdriveError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(std::string module, const std::string& what, double residual)
        : Error(std::move(module), what), residual_(residual) {}

    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace memcore
