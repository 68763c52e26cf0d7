#pragma once

#include <cmath>
#include <span>

#include "kfp/params.hpp"

namespace kfp {

/// Anisotropic frequency weights.
///
/// SmallW:  w(phi, xi)    = max(|xi|,         |phi|^{1/(1+2*beta)})
/// BigW:    W(t, phi, xi) = max(|xi - t*phi|, |phi|^{1/(1+2*beta)})
///
/// w = W(0,.,.) exactly.  eval_weight returns the weight raised to
/// `exponent`; the degenerate value 0^{negative} is reported as the +inf
/// sentinel and 0^0 as 1 (IEEE pow semantics, relied upon throughout).
enum class WeightKind { SmallW, BigW };

struct WeightSpec {
    WeightKind kind = WeightKind::SmallW;
    double exponent = 1.0;
};

namespace detail {

inline double euclid(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

}  // namespace detail

inline double eval_weight(const WeightSpec& spec, double t,
                          std::span<const double> phi,
                          std::span<const double> xi,
                          const KineticParams& params) {
    params.validate();
    const double abs_phi = detail::euclid(phi);
    double shifted = 0.0;
    if (spec.kind == WeightKind::BigW) {
        for (std::size_t a = 0; a < xi.size(); ++a) {
            const double c = xi[a] - t * phi[a];
            shifted += c * c;
        }
        shifted = std::sqrt(shifted);
    } else {
        shifted = detail::euclid(xi);
    }
    const double base =
        std::max(shifted, std::pow(abs_phi, 1.0 / (1.0 + 2.0 * params.beta)));
    return std::pow(base, spec.exponent);
}

inline double eval_weight(const WeightSpec& spec, double t, double phi,
                          double xi, const KineticParams& params) {
    return eval_weight(spec, t, std::span<const double>(&phi, 1),
                       std::span<const double>(&xi, 1), params);
}

}  // namespace kfp
