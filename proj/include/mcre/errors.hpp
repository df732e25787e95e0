#pragma once

#include <stdexcept>
#include <string>

namespace mcre {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation
/// (e.g. a probability outside [0,1]).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed call: wrong sizes, missing randomness, empty collections.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Model parameters violate their declared invariants.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A minorization could not be certified (residual law is not a valid CDF,
/// or a grid check came out negative where it must not).
class CertificationError : public Error {
public:
    using Error::Error;
};

/// A block schedule could not be built within the search limits.
class ScheduleError : public Error {
public:
    using Error::Error;
};

/// Input densities or samples are unusable (e.g. not normalized).
class InputError : public Error {
public:
    using Error::Error;
};

/// Configuration failed validation; the message carries the field path.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Runtime failure of an experiment (I/O, resource caps).
class RunError : public Error {
public:
    using Error::Error;
};

}  // namespace mcre
