#pragma once

#include <stdexcept>
#include <string>

namespace hkb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (y <= 0, x < 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Parameter combination the model excludes (c + 1 <= 0, |a| >= 1, p < 1, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Inconsistent shapes or sizes; distinct from an invariant failure.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Spec that violates an invariant an operation depends on.
class InvalidSpecError : public Error {
public:
    using Error::Error;
};

/// A computation that must succeed for valid input did not.
class InternalConsistencyError : public Error {
public:
    using Error::Error;
};

/// Linear solve or time step that failed to converge.
class StepFailure : public Error {
public:
    StepFailure(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Sample set that does not determine the fitted constants.
class FitUnderdeterminedError : public Error {
public:
    using Error::Error;
};

} // namespace hkb
