#pragma once

#include <stdexcept>
#include <string>

namespace tzone {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

// Quadrature or series failed to reach the requested tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double achieved)
        : Error(what + " (achieved tolerance " + std::to_string(achieved) + ")"), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }
    const char* kind() const noexcept override { return "numerical"; }

private:
    double achieved_;
};

class SolverError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "solver"; }
};

class AssemblyError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "assembly"; }
};

class ConstructionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "construction"; }
};

class CalibrationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "calibration"; }
};

class IngestionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ingestion"; }
};

class SimulationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "simulation"; }
};

}  // namespace tzone
