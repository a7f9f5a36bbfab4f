#ifndef BPRE_ERRORS_HPP
#define BPRE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bpre {

// Bad user input: malformed environments, out-of-range indices, invalid
// parameters. CLI maps this to exit code 1.
struct InputError : std::invalid_argument {
    explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Evaluation requested at a point outside the operation's domain (e.g. s = 1).
struct DomainError : InputError {
    explicit DomainError(const std::string& msg) : InputError(msg) {}
};

// Inputs that make the operation degenerate (zero denominators, zero matrices).
struct DegenerateInputError : InputError {
    explicit DegenerateInputError(const std::string& msg) : InputError(msg) {}
};

// Numerical failure: non-convergence, corrupted spectral data, loss of
// positivity. CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Population counts left the exactly-representable integer range.
struct SaturationError : NumericalError {
    explicit SaturationError(const std::string& msg) : NumericalError(msg) {}
};

// Operation requires hypotheses the environment does not satisfy (e.g. a
// positivity condition with gamma = infinity).
struct NotApplicableError : NumericalError {
    explicit NotApplicableError(const std::string& msg) : NumericalError(msg) {}
};

// Exhaustive enumeration would exceed the configured budget. CLI exit code 3.
struct BudgetExceededError : std::runtime_error {
    explicit BudgetExceededError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bpre

#endif
