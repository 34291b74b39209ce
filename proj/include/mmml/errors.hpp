#pragma once

#include <stdexcept>
#include <string>

namespace mmml {

// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size mismatch between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Violated numerical precondition (asymmetry, non-SPD input, PSD check
// failure, ill-conditioned solve).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Image set too small or constant to model.
class DegenerateSetError : public Error {
public:
    using Error::Error;
};

// Evaluation protocol cannot proceed (no same/different-class pairs,
// infeasible gallery/probe split).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Malformed file: set matrix, manifest, or model container.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace mmml
