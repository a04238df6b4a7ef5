#pragma once

#include <stdexcept>
#include <string>

namespace orthogmm {

// Invalid arguments, shape mismatches, out-of-range values. CLI exit code 2.
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or non-finite input data. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Base for numerical failures (infeasibility, non-convergence, degeneracy).
// CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Constraint set is empty at the requested tuning parameters.
class InfeasibleError : public NumericalError {
public:
    InfeasibleError(const std::string& msg, int worst_constraint, double violation)
        : NumericalError(msg), worst_constraint_(worst_constraint), violation_(violation) {}
    explicit InfeasibleError(const std::string& msg)
        : NumericalError(msg), worst_constraint_(-1), violation_(0.0) {}

    int worst_constraint() const { return worst_constraint_; }
    double violation() const { return violation_; }

private:
    int worst_constraint_;
    double violation_;
};

// Iterative solver exceeded its iteration cap or stalled.
class ConvergenceError : public NumericalError {
public:
    explicit ConvergenceError(const std::string& msg) : NumericalError(msg) {}
};

// The parameter of interest is not identified by the orthogonalized moments.
class IdentificationError : public NumericalError {
public:
    explicit IdentificationError(const std::string& msg) : NumericalError(msg) {}
};

// Estimated variance is (numerically) zero; t statistics would be infinite.
class DegenerateVarianceError : public NumericalError {
public:
    explicit DegenerateVarianceError(const std::string& msg) : NumericalError(msg) {}
};

// IV denominator vanished along the alternating fit.
class WeakIdentificationError : public NumericalError {
public:
    explicit WeakIdentificationError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace orthogmm
