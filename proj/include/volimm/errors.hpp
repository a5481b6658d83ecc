#pragma once

#include <stdexcept>
#include <string>

namespace volimm {

// Root of everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: scenario files, CLI arguments, out-of-range parameters.
// The CLI maps these to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

struct SchemaError : ConfigError {
    explicit SchemaError(const std::string& path, const std::string& what)
        : ConfigError("schema error at '" + path + "': " + what), path(path) {}
    std::string path;
};

struct RangeError : ConfigError {
    using ConfigError::ConfigError;
};

struct MissingRunError : ConfigError {
    using ConfigError::ConfigError;
};

// Numerical failures at run time. The CLI maps these to exit code 3.
struct NumericalError : Error {
    using Error::Error;
};

// det(g) fell below the rank tolerance somewhere; carries the worst node.
struct RankDeficientError : NumericalError {
    RankDeficientError(std::size_t node, double det_rel)
        : NumericalError("immersion rank deficient at node " + std::to_string(node) +
                         " (relative det(g) = " + std::to_string(det_rel) + ")"),
          node(node), det_rel(det_rel) {}
    std::size_t node;
    double det_rel;
};

struct NoConvergenceError : NumericalError {
    NoConvergenceError(const std::string& op, int iterations, double residual)
        : NumericalError(op + " did not converge after " + std::to_string(iterations) +
                         " iterations (relative residual " + std::to_string(residual) + ")"),
          iterations(iterations), residual(residual) {}
    int iterations;
    double residual;
};

struct MinimalImmersionError : NumericalError {
    MinimalImmersionError()
        : NumericalError("operation requires a non-minimal immersion (Tr S vanishes identically)") {}
};

struct MinimalIncompatibleRhsError : NumericalError {
    explicit MinimalIncompatibleRhsError(double mean)
        : NumericalError("elliptic solve on a minimal immersion needs a zero-mean right-hand side "
                         "(weighted mean = " + std::to_string(mean) + ")") {}
};

struct NewtonError : NumericalError {
    NewtonError(const std::string& where, int iterations, double residual)
        : NumericalError(where + ": Newton iteration exceeded cap (" + std::to_string(iterations) +
                         " iterations, residual " + std::to_string(residual) + ")") {}
};

struct CflError : NumericalError {
    CflError(double dt, double dt_max)
        : NumericalError("time step violates the CFL bound: dt = " + std::to_string(dt) +
                         " > " + std::to_string(dt_max)) {}
};

struct InvalidInitialDataError : NumericalError {
    InvalidInitialDataError(double rho_dev, double constraint)
        : NumericalError("initial state is off the constraint manifold: max|rho-1| = " +
                         std::to_string(rho_dev) + ", constraint residual = " +
                         std::to_string(constraint)) {}
};

} // namespace volimm
