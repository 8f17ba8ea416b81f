#pragma once

#include <stdexcept>
#include <string>

namespace madpot {

// Error taxonomy shared across the library. The CLI maps these to exit codes:
// parse/io -> 3, infeasible/numerical/shape/invalid-input -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct InvalidInputError : Error {
    using Error::Error;
};

// Marginal masses or constraints cannot be satisfied.
struct InfeasibleError : Error {
    using Error::Error;
};

// Numerical degeneracy (e.g. kernel underflow at small lambda).
struct NumericalError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace madpot
