#pragma once

#include <cmath>

#include "kfp/error.hpp"

namespace kfp {

/// Model parameters: diffusion order beta, dimension, and the ellipticity
/// window [lambda, big_lambda] for rough coefficients.
struct KineticParams {
    double beta = 1.0;
    int dim = 1;
    double lambda = 1.0;
    double big_lambda = 1.0;

    /// Regularity exponent gained in x, beta/(2 beta + 1); always in (0, 1/2).
    double s_x() const { return beta / (2.0 * beta + 1.0); }

    void validate() const {
        if (!(beta > 0.0) || !std::isfinite(beta))
            throw ConfigError("KineticParams: beta must be positive and finite");
        if (dim < 1 || dim > 3)
            throw ConfigError("KineticParams: dim must be in [1, 3]");
        if (!(lambda > 0.0) || !(big_lambda >= lambda) || !std::isfinite(big_lambda))
            throw ConfigError("KineticParams: need 0 < lambda <= big_lambda < inf");
    }
};

}  // namespace kfp
