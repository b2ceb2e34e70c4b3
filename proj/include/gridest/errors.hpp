#pragma once

#include <stdexcept>
#include <string>

namespace gridest {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller violated a documented precondition (dimension mismatch,
/// non-finite input, rank-deficient matrix where full rank is required, ...).
struct ContractViolation : Error {
    using Error::Error;
};

/// An iterative numerical routine failed to produce a usable result
/// (SVD non-convergence, near-singular inner system).
struct NumericalFailure : Error {
    using Error::Error;
};

/// A symmetric matrix that must be positive definite is not.
struct NotPositiveDefinite : NumericalFailure {
    using NumericalFailure::NumericalFailure;
};

/// The constructed network / measurement model is unusable
/// (disconnected grid, disconnected monitor graph, ...).
struct ModelError : Error {
    using Error::Error;
};

/// A stacked linear system handed to the minimum-norm solver has no
/// exact solution.
struct InconsistentSystem : Error {
    using Error::Error;
};

/// Not enough data points to perform a requested fit.
struct InsufficientData : Error {
    using Error::Error;
};

/// An algorithm invariant that should hold by construction was breached
/// at run time; usually indicates a numerical-tolerance problem.
struct AlgorithmFailure : Error {
    using Error::Error;
};

/// Malformed configuration or input file. Carries enough context to point
/// the user at the offending key or line.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace gridest
