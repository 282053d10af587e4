#pragma once

#include <stdexcept>
#include <string>

namespace recon {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Base for every numerical failure that the CLI reports as a solver failure.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public SolverError {
public:
    RankDeficiencyError(const std::string& what, double condition, int nullity = -1)
        : SolverError(what), condition_(condition), nullity_(nullity) {}
    double condition() const noexcept { return condition_; }
    // Dimension of the numerical nullspace when it was computed, -1 otherwise.
    int nullity() const noexcept { return nullity_; }

private:
    double condition_;
    int nullity_;
};

class ConvergenceError : public SolverError {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : SolverError(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

class DivergenceError : public SolverError {
public:
    DivergenceError(const std::string& what, long step)
        : SolverError(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

// Raised when the hyperelastic stretch 1 + w' is not positive.
class NonPhysicalDeformation : public SolverError {
public:
    NonPhysicalDeformation(const std::string& what, double x, double stretch)
        : SolverError(what), x_(x), stretch_(stretch) {}
    double x() const noexcept { return x_; }
    double stretch() const noexcept { return stretch_; }

private:
    double x_;
    double stretch_;
};

}  // namespace recon
