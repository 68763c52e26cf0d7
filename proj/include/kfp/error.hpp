#pragma once

#include <stdexcept>

namespace kfp {

/// Invalid user input: bad parameters, malformed config, mismatched grids or frames.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown: quadrature non-convergence, iteration stagnation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A computed quantity violated a declared tolerance or invariant.
struct ToleranceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kfp
