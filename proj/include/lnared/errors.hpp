#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace lnared {

// Base for everything thrown by this library. `kind()` is a stable
// machine-readable tag used by the CLI when writing one-line JSON errors.
class LnaError : public std::runtime_error {
public:
    LnaError(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Malformed input: config files, flag values, schema violations. Exit code 1.
class ConfigError : public LnaError {
public:
    explicit ConfigError(const std::string& msg) : LnaError("config", msg) {}
};

// Structural model problems detected before any integration: stoichiometry
// shape mismatches, A_x v_i != 0 for a fast reaction, non-invertible
// transform. Exit code 1.
class ValidationError : public LnaError {
public:
    explicit ValidationError(const std::string& msg) : LnaError("validation", msg) {}
};

// Coordinate-change matrix unusable: singular or condition number past 1e12.
// Exit code 1 (a property of the supplied matrices, not of a numeric run).
class TransformError : public LnaError {
public:
    TransformError(const std::string& msg, double cond)
        : LnaError("transform", msg), cond(cond) {}
    double cond;
};

// A propensity evaluated more negative than the roundoff clamp allows.
// Carries the offending state so callers can report where the model left
// its physical domain. Exit code 2.
class DomainError : public LnaError {
public:
    DomainError(const std::string& msg, Eigen::VectorXd state, double t, int reaction)
        : LnaError("domain", msg), state(std::move(state)), t(t), reaction(reaction) {}
    Eigen::VectorXd state;
    double t;
    int reaction;
};

// Newton failed to meet tolerance, or converged to a non-Hurwitz root.
class ConvergenceError : public LnaError {
public:
    ConvergenceError(const std::string& msg, double residual)
        : LnaError("convergence", msg), residual(residual) {}
    double residual;
};

// A linear solve hit a condition number beyond 1e12 (singular B2 and friends).
class SingularityError : public LnaError {
public:
    SingularityError(const std::string& msg, double cond)
        : LnaError("singularity", msg), cond(cond) {}
    double cond;
};

// Adaptive integrator step size underflowed.
class StiffnessError : public LnaError {
public:
    StiffnessError(const std::string& msg, double t, double h)
        : LnaError("stiffness", msg), t(t), h(h) {}
    double t;
    double h;
};

// A Monte Carlo realization produced a nonfinite state.
class DivergenceError : public LnaError {
public:
    DivergenceError(const std::string& msg, long long realization, double t)
        : LnaError("divergence", msg), realization(realization), t(t) {}
    long long realization;
    double t;
};

} // namespace lnared
