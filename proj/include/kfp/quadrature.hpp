#pragma once

#include <cmath>
#include <functional>

#include "kfp/error.hpp"

namespace kfp {

/// 16-point Gauss-Legendre rule on [-1, 1] (positive half; rule is symmetric).
inline constexpr double GL16_NODE[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
inline constexpr double GL16_WEIGHT[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

template <class F>
double gauss16(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i)
        acc += GL16_WEIGHT[i] * (f(c - h * GL16_NODE[i]) + f(c + h * GL16_NODE[i]));
    return acc * h;
}

namespace detail {

template <class F>
double adaptive_gauss_rec(const F& f, double a, double b, double whole,
                          double tol, int depth) {
    if (depth > 52)
        throw NumericalError("adaptive quadrature: bisection depth exceeded");
    const double m = 0.5 * (a + b);
    const double left = gauss16(f, a, m);
    const double right = gauss16(f, m, b);
    const double delta = left + right - whole;
    if (std::abs(delta) <= tol) return left + right;
    return adaptive_gauss_rec(f, a, m, left, 0.5 * tol, depth + 1) +
           adaptive_gauss_rec(f, m, b, right, 0.5 * tol, depth + 1);
}

}  // namespace detail

/// Adaptive bisection around fixed-order Gauss-Legendre panels. The
/// tolerance is absolute; callers scale it by their own magnitude estimate.
template <class F>
double adaptive_gauss(const F& f, double a, double b, double abs_tol) {
    if (!(b > a)) return 0.0;
    return detail::adaptive_gauss_rec(f, a, b, gauss16(f, a, b), abs_tol, 0);
}

}  // namespace kfp
