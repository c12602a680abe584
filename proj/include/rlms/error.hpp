#pragma once

#include <stdexcept>
#include <string>

namespace rlms {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible shapes, bad axes, images too small or not divisible as required.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Input outside the mathematical domain of an op (log/sqrt of a negative).
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid scalar argument (omega outside [0,1], upsample factor < 1, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Caller broke a documented precondition (empty batch, backward on non-scalar, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed checkpoint container or config file.
class FormatError : public Error {
public:
    using Error::Error;
};

// A loss or value went non-finite.
class NumericError : public Error {
public:
    using Error::Error;
};

// Unknown key or unparsable value in a run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Unreadable or missing input data.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace rlms
