#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stiffsim {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A matrix required to be symmetric positive definite is not.
struct NotSpdError : Error {
    NotSpdError(std::string which_, double min_eigenvalue_)
        : Error("matrix " + which_ + " is not symmetric positive definite (min eigenvalue " +
                std::to_string(min_eigenvalue_) + ")"),
          which(std::move(which_)),
          min_eigenvalue(min_eigenvalue_) {}
    std::string which;
    double min_eigenvalue;
};

struct NotPsdError : Error {
    NotPsdError(std::string which_, double min_eigenvalue_)
        : Error("matrix " + which_ + " is not positive semi-definite (min eigenvalue " +
                std::to_string(min_eigenvalue_) + ")"),
          which(std::move(which_)),
          min_eigenvalue(min_eigenvalue_) {}
    std::string which;
    double min_eigenvalue;
};

/// ||Kc - cK|| exceeds the commutation tolerance.
struct CommutationViolationError : Error {
    explicit CommutationViolationError(double defect_)
        : Error("stiffness and damping matrices do not commute (relative defect " +
                std::to_string(defect_) + ")"),
          defect(defect_) {}
    double defect;
};

struct SimultaneousDiagonalizationError : Error {
    explicit SimultaneousDiagonalizationError(double offdiag_)
        : Error("damping is not diagonal in any stiffness eigenbasis (off-diagonal mass " +
                std::to_string(offdiag_) + ")"),
          offdiag(offdiag_) {}
    double offdiag;
};

struct QuadratureNonConvergenceError : Error {
    QuadratureNonConvergenceError(double achieved_, double requested_)
        : Error("quadrature failed to converge: achieved " + std::to_string(achieved_) +
                ", requested " + std::to_string(requested_)),
          achieved(achieved_),
          requested(requested_) {}
    double achieved;
    double requested;
};

/// Increment list does not span the requested step.
struct PathMismatchError : Error {
    PathMismatchError(double span_, double expected_)
        : Error("increments span " + std::to_string(span_) + " but step is " +
                std::to_string(expected_)),
          span(span_),
          expected(expected_) {}
    double span;
    double expected;
};

struct GridMismatchError : Error {
    explicit GridMismatchError(const std::string& msg) : Error("grid mismatch: " + msg) {}
};

struct GridNestingError : Error {
    explicit GridNestingError(const std::string& msg) : Error("grid nesting: " + msg) {}
};

struct NonFiniteStateError : Error {
    NonFiniteStateError() : Error("state contains NaN or Inf") {}
};

struct UnsupportedStochasticError : Error {
    UnsupportedStochasticError()
        : Error("method supports only deterministic systems (damping and noise must be zero)") {}
};

struct BlowUpError : Error {
    BlowUpError(long step_, double norm_)
        : Error("trajectory blow-up at step " + std::to_string(step_) + " (norm " +
                std::to_string(norm_) + ")"),
          step(step_),
          norm(norm_) {}
    long step;
    double norm;
};

struct MissingPotentialError : Error {
    MissingPotentialError() : Error("soft potential callback not provided") {}
};

struct DimensionMismatchError : Error {
    explicit DimensionMismatchError(const std::string& msg)
        : Error("dimension mismatch: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct UnknownProblemError : ConfigError {
    explicit UnknownProblemError(const std::string& name)
        : ConfigError("unknown problem \"" + name + "\"") {}
};

struct UnknownMethodError : ConfigError {
    explicit UnknownMethodError(const std::string& name)
        : ConfigError("unknown method \"" + name + "\"") {}
};

struct MissingFieldError : ConfigError {
    explicit MissingFieldError(const std::string& field)
        : ConfigError("missing required field \"" + field + "\"") {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("I/O error: " + msg) {}
};

}  // namespace stiffsim
