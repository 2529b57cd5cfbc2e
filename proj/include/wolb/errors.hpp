#pragma once

#include <stdexcept>
#include <string>

namespace wolb {

/// Negative populations, invalid parameters, missing equilibria.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative method ran out of iterations or the integrator step underflowed.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The requested target cannot be reached under the given release capacity.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input files or configuration.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wolb
