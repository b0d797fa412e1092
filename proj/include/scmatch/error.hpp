#pragma once

#include <stdexcept>
#include <string>

namespace scmatch {

/// Malformed input: bad schema, violated preconditions, invalid arguments.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (non-convergence, singular system, fold).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double residual = -1.0)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace scmatch
