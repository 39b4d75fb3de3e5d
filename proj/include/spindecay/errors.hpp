#pragma once

#include <stdexcept>
#include <string>

namespace spindecay {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid value at type construction or config validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Simulation step-size guard tripped (per-step decay fraction too large
/// for the Poisson thinning approximation).
class SimulationGuardError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

/// Degenerate fit: decay constants too close or covariance numerically singular.
class IllConditionedError : public FitError {
public:
    using FitError::FitError;
};

class NonConvergenceError : public FitError {
public:
    using FitError::FitError;
};

class CalibrationError : public FitError {
public:
    using FitError::FitError;
};

class MissingPolarizationError : public Error {
public:
    using Error::Error;
};

class NoSignificantExtremumError : public Error {
public:
    using Error::Error;
};

class UnderDeterminedError : public Error {
public:
    using Error::Error;
};

/// File and text-format errors; carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}

    long line() const { return line_; }

private:
    long line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace spindecay
