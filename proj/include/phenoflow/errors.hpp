#pragma once

#include <stdexcept>
#include <string>

namespace phenoflow {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid scalar parameter (gamma, alpha, cfl, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Field/grid/mesh shape mismatch.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Config file parsing or validation failure.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File system / CSV read-write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Time step failure (instability, invariant violation). Carries the
/// state of the offending step so the caller can report it.
class SolverError : public Error {
public:
    SolverError(const std::string& what, long step, double time)
        : Error(what), step_(step), time_(time) {}

    long step() const { return step_; }
    double time() const { return time_; }

private:
    long step_ = -1;
    double time_ = 0.0;
};

/// Support of the solution reached the domain boundary while the
/// boundary-contact policy is set to abort.
class BoundaryContactError : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace phenoflow
