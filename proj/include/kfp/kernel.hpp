#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/quadrature.hpp"

namespace kfp {

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

/// Antiderivative of |u|^{2 beta}: odd, C^1 through the kink at u = 0.
inline double abs_pow_primitive(double u, double beta) {
    return std::copysign(std::pow(std::abs(u), 2.0 * beta + 1.0), u) /
           (2.0 * beta + 1.0);
}

/// Generic kink-split adaptive quadrature path; exercised directly by tests
/// and used for dim >= 2 with beta != 1.
inline double phase_integral_quadrature(double s, double t,
                                        std::span<const double> phi,
                                        std::span<const double> xi,
                                        double beta) {
    // Work in sigma = tau - t_center: |xi - tau phi|^2 = |xi_perp|^2 +
    // |phi|^2 sigma^2.  Evaluating the raw components near a distant line
    // minimum cancels catastrophically and the noise stalls the bisection.
    const double phi2 = norm_sq(phi);
    const double tstar = dot(xi, phi) / phi2;
    double perp2 = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double c = xi[i] - tstar * phi[i];
        perp2 += c * c;
    }
    auto integrand = [&](double sig) {
        return std::pow(perp2 + phi2 * sig * sig, beta);
    };
    const double a = s - tstar, b = t - tstar;
    const double scale = (t - s) * std::max(integrand(a), integrand(b));
    if (scale == 0.0) return 0.0;
    const double tol = 1e-13 * scale;
    if (a < 0.0 && b > 0.0)
        return adaptive_gauss(integrand, a, 0.0, 0.5 * tol) +
               adaptive_gauss(integrand, 0.0, b, 0.5 * tol);
    return adaptive_gauss(integrand, a, b, tol);
}

}  // namespace detail

/// Integral of |xi - tau*phi|^{2 beta} over tau in [s, t].
///
/// dim 1 and beta 1 use exact antiderivatives (the dim-1 primitive
/// sign(u)|u|^{2 beta + 1}/(2 beta + 1) absorbs the kink where the line
/// crosses the origin); other cases split at the kink and integrate each
/// smooth piece by adaptive Gauss-Legendre to relative 1e-12.
inline double phase_integral(double s, double t, std::span<const double> phi,
                             std::span<const double> xi, double beta) {
    if (s > t) throw ConfigError("phase_integral: requires s <= t");
    if (s == t) return 0.0;
    const double phi2 = detail::norm_sq(phi);
    if (phi2 == 0.0) return (t - s) * std::pow(detail::norm_sq(xi), beta);
    if (beta == 1.0) {
        // Expand around the line minimum t_c: |xi - tau phi|^2 =
        // |xi_perp|^2 + |phi|^2 (tau - t_c)^2.  The raw cubic antiderivative
        // cancels catastrophically when |t_c| is large.
        const double tc = detail::dot(xi, phi) / phi2;
        double perp2 = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double c = xi[i] - tc * phi[i];
            perp2 += c * c;
        }
        const double a = t - tc;
        const double b = s - tc;
        return (t - s) * (perp2 + phi2 * (a * a + a * b + b * b) / 3.0);
    }
    if (phi.size() == 1) {
        const double us = xi[0] - s * phi[0];
        const double ut = xi[0] - t * phi[0];
        return (detail::abs_pow_primitive(us, beta) -
                detail::abs_pow_primitive(ut, beta)) /
               phi[0];
    }
    return detail::phase_integral_quadrature(s, t, phi, xi, beta);
}

inline double phase_integral(double s, double t,
                             std::initializer_list<double> phi,
                             std::initializer_list<double> xi, double beta) {
    return phase_integral(s, t, std::span<const double>(phi.begin(), phi.size()),
                          std::span<const double>(xi.begin(), xi.size()), beta);
}

/// Scalar fast path for dim = 1 mode loops.
inline double phase_integral1(double s, double t, double phi, double xi,
                              double beta) {
    if (phi == 0.0) return (t - s) * std::pow(xi * xi, beta);
    return (detail::abs_pow_primitive(xi - s * phi, beta) -
            detail::abs_pow_primitive(xi - t * phi, beta)) /
           phi;
}

/// One evaluation of the per-mode propagator exp(-phase).
struct KernelEvaluation {
    double s = 0.0, t = 0.0;
    std::array<double, 3> phi{}, xi{};
    int dim = 1;
    double phase = 0.0;
    double value = 1.0;
};

inline KernelEvaluation kernel_K(double s, double t, std::span<const double> phi,
                                 std::span<const double> xi, double beta) {
    KernelEvaluation k;
    k.s = s;
    k.t = t;
    k.dim = static_cast<int>(phi.size());
    std::copy(phi.begin(), phi.end(), k.phi.begin());
    std::copy(xi.begin(), xi.end(), k.xi.begin());
    k.phase = phase_integral(s, t, phi, xi, beta);
    k.value = std::exp(-k.phase);
    return k;
}

inline KernelEvaluation kernel_K(double s, double t,
                                 std::initializer_list<double> phi,
                                 std::initializer_list<double> xi, double beta) {
    return kernel_K(s, t, std::span<const double>(phi.begin(), phi.size()),
                    std::span<const double>(xi.begin(), xi.size()), beta);
}

/// Accumulated phase along a time lattice: P[0] = 0,
/// P[n] = integral of |xi - tau*phi|^{2 beta} from tline[0] to tline[n].
/// Gives K(t_n, t_m) = exp(-(P[n] - P[m])) for m <= n.
inline std::vector<double> cumulative_phases(const std::vector<double>& tline,
                                             std::span<const double> phi,
                                             std::span<const double> xi,
                                             double beta) {
    std::vector<double> p(tline.size(), 0.0);
    for (std::size_t n = 1; n < tline.size(); ++n)
        p[n] = p[n - 1] + phase_integral(tline[n - 1], tline[n], phi, xi, beta);
    return p;
}

/// One exponential-integrator step: decay = K(t1, t0) and weights with
///   integral_{t0}^{t1} K(t1, s) h(s) ds  ~  w0 h(t0) + w1 h(t1)
/// exact for h linear on the step. The s-integrand is analytic except where
/// the line xi - s*phi crosses the origin, so the rule splits there.
struct StepWeights {
    double decay = 1.0;
    double w0 = 0.0, w1 = 0.0;
};

namespace detail {

template <class PhaseToEnd>
void accumulate_linear_weights(double t0, double t1, double a, double b,
                               const PhaseToEnd& phase_to, double& w0,
                               double& w1) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double dt = t1 - t0;
    for (int i = 0; i < 8; ++i) {
        for (double sgn : {-1.0, 1.0}) {
            const double s = c + sgn * h * GL16_NODE[i];
            const double kv = std::exp(-phase_to(s));
            const double wq = GL16_WEIGHT[i] * h;
            w0 += wq * kv * (t1 - s) / dt;
            w1 += wq * kv * (s - t0) / dt;
        }
    }
}

template <class PhaseToEnd>
StepWeights step_weights_impl(double t0, double t1, std::span<const double> phi,
                              std::span<const double> xi, double end_phase,
                              const PhaseToEnd& phase_to) {
    StepWeights w;
    w.decay = std::exp(-end_phase);
    const double phi2 = norm_sq(phi);
    double tstar = t0;
    if (phi2 > 0.0) tstar = dot(xi, phi) / phi2;
    if (tstar > t0 && tstar < t1) {
        accumulate_linear_weights(t0, t1, t0, tstar, phase_to, w.w0, w.w1);
        accumulate_linear_weights(t0, t1, tstar, t1, phase_to, w.w0, w.w1);
    } else {
        accumulate_linear_weights(t0, t1, t0, t1, phase_to, w.w0, w.w1);
    }
    return w;
}

}  // namespace detail

/// Forward step weights: kernel K(t1, s) integrated against the linear hats.
inline StepWeights step_weights(double t0, double t1,
                                std::span<const double> phi,
                                std::span<const double> xi, double beta) {
    const double end_phase = phase_integral(t0, t1, phi, xi, beta);
    auto phase_to = [&](double s) { return phase_integral(s, t1, phi, xi, beta); };
    return detail::step_weights_impl(t0, t1, phi, xi, end_phase, phase_to);
}

/// Time-reversed step weights: kernel K(t, t0) integrated against the linear
/// hats, for backward sweeps g(t0) = decay * g(t1) + w0 h(t0) + w1 h(t1).
inline StepWeights step_weights_star(double t0, double t1,
                                     std::span<const double> phi,
                                     std::span<const double> xi, double beta) {
    const double end_phase = phase_integral(t0, t1, phi, xi, beta);
    auto phase_to = [&](double t) { return phase_integral(t0, t, phi, xi, beta); };
    return detail::step_weights_impl(t0, t1, phi, xi, end_phase, phase_to);
}

}  // namespace kfp
