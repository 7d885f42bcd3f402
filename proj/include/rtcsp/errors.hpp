#pragma once

#include <stdexcept>
#include <string>

namespace rtcsp {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller violated a documented precondition (dimension mismatch,
/// out-of-range parameter, empty input, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Input is outside the mathematical domain of the operation
/// (non-PD matrix passed to log/sqrt, singular sum covariance, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Input is formally valid but too degenerate to produce a meaningful
/// result (rank-deficient PCA, zero-variance channel, class with too
/// few trials, ...).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// An iterative or numerical procedure failed to converge / stay stable.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// A class label present on one side of a transfer pair is missing on
/// the other side.
class MissingClassError : public Error {
public:
    using Error::Error;
};

/// File could not be opened / read / written.
class IoError : public Error {
public:
    using Error::Error;
};

/// File exists but its contents do not match the declared format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Experiment or dataset configuration failed schema validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace rtcsp
