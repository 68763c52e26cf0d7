#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/field.hpp"
#include "kfp/grid.hpp"
#include "kfp/params.hpp"
#include "kfp/weights.hpp"

namespace kfp {

/// Mixed-norm evaluation on spectral fields.
///
/// An inner (x,v) norm is a Fourier multiplier norm; the time direction is
/// aggregated by trapezoid quadrature (L2_t, L1_t), a max (Sup_t), or a single
/// slice (Fixed_t).  Negative-order multipliers blow up on the degenerate
/// modes phi=0 / xi=0; those modes are left out of the sum and their plain L2
/// mass is reported through NormResult.excluded_mass.

enum class TimeMode { L2_t, L1_t, Sup_t, Fixed_t };

enum class InnerNorm {
    L2,       ///< plain L^2_{x,v}
    HdotV,    ///< multiplier |xi|^gamma
    HdotX,    ///< multiplier |phi|^s
    Xdot,     ///< gamma >= 0: sqrt(|xi|^{2g} + |phi|^{2g/(2b+1)}); gamma = 0 is plain L2
    XdotSum,  ///< gamma < 0: per-mode infimum over splittings, see note below
};

/// XdotSum evaluates the norm of L2_x Hdot_v^g + L2_v Hdot_x^{g/(2b+1)},
/// defined as inf over f = f1 + f2 of sqrt(|f1|_a^2 + |f2|_b^2).  For
/// multiplier norms the infimum decouples mode by mode: with a = |xi|^{2g},
/// b = |phi|^{2g/(2b+1)} and c1 = lambda*c, minimizing lambda^2 a +
/// (1-lambda)^2 b gives lambda = b/(a+b) and the exact per-mode value
/// c^2 * a*b/(a+b) = c^2 / (1/a + 1/b), with the 1/inf = 0 convention when
/// one component weight degenerates.  Since min(a,b)/2 <= ab/(a+b) <=
/// min(a,b), this norm is within a factor sqrt(2) of the min-multiplier
/// (equivalently w^gamma) norm; we keep the exact-infimum normalization.
struct NormSpace {
    TimeMode time_mode = TimeMode::L2_t;
    InnerNorm inner = InnerNorm::L2;
    double order = 0.0;   ///< gamma or s for the weighted inners
    int fixed_index = 0;  ///< slice index for Fixed_t

    void validate(const PhaseGrid& g) const {
        if (!std::isfinite(order)) throw ConfigError("norm order must be finite");
        if (inner == InnerNorm::Xdot && order < 0.0)
            throw ConfigError("Xdot norm requires order >= 0; use XdotSum below zero");
        if (inner == InnerNorm::XdotSum && order >= 0.0)
            throw ConfigError("XdotSum norm requires order < 0");
        if (time_mode == TimeMode::Fixed_t &&
            (fixed_index < 0 || fixed_index >= g.n_slices()))
            throw ConfigError("fixed time index out of range");
    }

    static NormSpace l2t_l2() { return {TimeMode::L2_t, InnerNorm::L2, 0.0, 0}; }
    static NormSpace l1t_l2() { return {TimeMode::L1_t, InnerNorm::L2, 0.0, 0}; }
    static NormSpace sup_l2() { return {TimeMode::Sup_t, InnerNorm::L2, 0.0, 0}; }
    static NormSpace fixed_l2(int idx) {
        return {TimeMode::Fixed_t, InnerNorm::L2, 0.0, idx};
    }
    static NormSpace l2t_hdot_v(double gamma) {
        return {TimeMode::L2_t, InnerNorm::HdotV, gamma, 0};
    }
    static NormSpace l2t_hdot_x(double s) {
        return {TimeMode::L2_t, InnerNorm::HdotX, s, 0};
    }
    static NormSpace l2t_xdot(double gamma) {
        return {TimeMode::L2_t,
                gamma < 0.0 ? InnerNorm::XdotSum : InnerNorm::Xdot, gamma, 0};
    }
};

struct NormResult {
    double value = 0.0;          ///< the norm over the retained modes
    double excluded_mass = 0.0;  ///< plain L2 mass on the excluded degenerate modes
    double l2_mass = 0.0;        ///< plain L2 norm of the whole field, same time mode
};

namespace detail {

/// Squared multiplier for one mode; +inf marks a degenerate excluded mode.
inline double multiplier_sq(InnerNorm inner, double order, double abs_phi,
                            double abs_xi, double beta) {
    switch (inner) {
        case InnerNorm::L2:
            return 1.0;
        case InnerNorm::HdotV:
            return std::pow(abs_xi, 2.0 * order);
        case InnerNorm::HdotX:
            return std::pow(abs_phi, 2.0 * order);
        case InnerNorm::Xdot: {
            if (order == 0.0) return 1.0;
            return std::pow(abs_xi, 2.0 * order) +
                   std::pow(abs_phi, 2.0 * order / (2.0 * beta + 1.0));
        }
        case InnerNorm::XdotSum: {
            const double inv_a = 1.0 / std::pow(abs_xi, 2.0 * order);
            const double inv_b =
                1.0 / std::pow(abs_phi, 2.0 * order / (2.0 * beta + 1.0));
            return 1.0 / (inv_a + inv_b);
        }
    }
    throw ConfigError("unknown inner norm");
}

struct SliceNorms {
    double weighted_sq = 0.0;
    double excluded_sq = 0.0;
    double l2_sq = 0.0;
};

inline SliceNorms slice_norms(const SpectralField& f, int t, InnerNorm inner,
                              double order, const KineticParams& p) {
    const PhaseGrid& g = f.grid;
    SliceNorms out;
    auto slice = f.slice(t);
    std::array<double, 3> phi{}, xi{};
    for (std::int64_t ix = 0; ix < g.modes_x(); ++ix) {
        g.phi_at(ix, phi);
        const double abs_phi =
            euclid(std::span<const double>(phi.data(), static_cast<std::size_t>(g.dim)));
        for (std::int64_t iv = 0; iv < g.modes_v(); ++iv) {
            g.xi_at(iv, xi);
            const double abs_xi = euclid(
                std::span<const double>(xi.data(), static_cast<std::size_t>(g.dim)));
            const double c2 =
                std::norm(slice[static_cast<std::size_t>(ix * g.modes_v() + iv)]);
            out.l2_sq += c2;
            const double m2 = multiplier_sq(inner, order, abs_phi, abs_xi, p.beta);
            if (std::isfinite(m2))
                out.weighted_sq += m2 * c2;
            else
                out.excluded_sq += c2;
        }
    }
    const double mw = g.mode_weight();
    out.weighted_sq *= mw;
    out.excluded_sq *= mw;
    out.l2_sq *= mw;
    return out;
}

/// Trapezoid-in-time aggregation of per-slice values.
inline double aggregate(TimeMode tm, const std::vector<double>& per_slice,
                        double dt, int fixed_index) {
    switch (tm) {
        case TimeMode::Fixed_t:
            return per_slice[static_cast<std::size_t>(fixed_index)];
        case TimeMode::Sup_t:
            return *std::max_element(per_slice.begin(), per_slice.end());
        case TimeMode::L1_t: {
            double acc = 0.0;
            for (std::size_t n = 0; n < per_slice.size(); ++n) {
                const bool edge = n == 0 || n + 1 == per_slice.size();
                acc += (edge ? 0.5 : 1.0) * per_slice[n];
            }
            return acc * dt;
        }
        case TimeMode::L2_t: {
            double acc = 0.0;
            for (std::size_t n = 0; n < per_slice.size(); ++n) {
                const bool edge = n == 0 || n + 1 == per_slice.size();
                acc += (edge ? 0.5 : 1.0) * per_slice[n] * per_slice[n];
            }
            return std::sqrt(acc * dt);
        }
    }
    throw ConfigError("unknown time mode");
}

}  // namespace detail

/// Full norm evaluation with the degenerate-mode report.  Weighted inners act
/// on physical-frame mode data; L2 is frame independent.
inline NormResult norm_result(const SpectralField& f, const NormSpace& space,
                              const KineticParams& params) {
    params.validate();
    space.validate(f.grid);
    if (space.inner != InnerNorm::L2 && f.frame != Frame::Physical)
        throw ConfigError("weighted norms are defined on physical-frame fields");
    const int n = f.grid.n_slices();
    std::vector<double> val(static_cast<std::size_t>(n));
    std::vector<double> exc(static_cast<std::size_t>(n));
    std::vector<double> l2(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        const auto s = detail::slice_norms(f, t, space.inner, space.order, params);
        val[static_cast<std::size_t>(t)] = std::sqrt(s.weighted_sq);
        exc[static_cast<std::size_t>(t)] = std::sqrt(s.excluded_sq);
        l2[static_cast<std::size_t>(t)] = std::sqrt(s.l2_sq);
    }
    NormResult out;
    const double dt = f.grid.dt();
    out.value = detail::aggregate(space.time_mode, val, dt, space.fixed_index);
    out.excluded_mass = detail::aggregate(space.time_mode, exc, dt, space.fixed_index);
    out.l2_mass = detail::aggregate(space.time_mode, l2, dt, space.fixed_index);
    return out;
}

/// Norm value alone; rejects fields whose mass on the excluded degenerate
/// modes exceeds 1e-10 of their overall L2 size (the norm is undefined there).
inline double norm(const SpectralField& f, const NormSpace& space,
                   const KineticParams& params) {
    const NormResult r = norm_result(f, space, params);
    if (r.excluded_mass > 1e-10 * r.l2_mass)
        throw ToleranceError(
            "negative-order norm undefined: degenerate-mode mass " +
            std::to_string(r.excluded_mass) + " exceeds 1e-10 of L2 size " +
            std::to_string(r.l2_mass));
    return r.value;
}

/// L^2_{x,v} pairing of two slices: sum f * conj(g) with the mode weight.
inline cplx duality_pairing_slice(const SpectralField& f, const SpectralField& g,
                                  int t) {
    require_same_layout(f, g, "duality_pairing");
    cplx acc = 0.0;
    auto fs = f.slice(t);
    auto gs = g.slice(t);
    for (std::size_t i = 0; i < fs.size(); ++i) acc += fs[i] * std::conj(gs[i]);
    return acc * f.grid.mode_weight();
}

/// Time-trapezoid pairing over the whole field, int <f(t), g(t)> dt.  With
/// both factors in compatible weighted spaces this realizes the duality
/// bracket and obeys |<f,g>| <= |f|_{L2_t Hdot_v^{-gamma}} |g|_{L2_t Hdot_v^gamma}.
inline cplx duality_pairing(const SpectralField& f, const SpectralField& g) {
    require_same_layout(f, g, "duality_pairing");
    cplx acc = 0.0;
    const int n = f.grid.n_slices();
    for (int t = 0; t < n; ++t) {
        const bool edge = t == 0 || t + 1 == n;
        acc += (edge ? 0.5 : 1.0) * duality_pairing_slice(f, g, t);
    }
    return acc * f.grid.dt();
}

}  // namespace kfp
