#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "kfp/duhamel.hpp"
#include "kfp/fft.hpp"
#include "kfp/norms.hpp"

namespace kfp {

/// Applies the velocity multiplier |xi|^{2 beta} to every mode: the discrete
/// fractional velocity Laplacian.  Physical-frame fields only.
inline SpectralField fractional_v_laplacian(const SpectralField& f,
                                            double beta) {
    if (f.frame != Frame::Physical)
        throw ConfigError("fractional_v_laplacian expects a physical-frame field");
    if (!(beta > 0.0))
        throw ConfigError("fractional_v_laplacian: beta must be positive");
    const PhaseGrid& g = f.grid;
    const std::int64_t mv = g.modes_v(), mx = g.modes_x();
    std::vector<double> mult(static_cast<std::size_t>(mv));
    std::array<double, 3> xi{};
    for (std::int64_t iv = 0; iv < mv; ++iv) {
        g.xi_at(iv, xi);
        double sq = 0.0;
        for (int a = 0; a < g.dim; ++a)
            sq += xi[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(a)];
        mult[static_cast<std::size_t>(iv)] = std::pow(sq, beta);
    }
    SpectralField out(g, Frame::Physical);
    for (int n = 0; n < g.n_slices(); ++n)
        for (std::int64_t ix = 0; ix < mx; ++ix)
            for (std::int64_t iv = 0; iv < mv; ++iv)
                out.at(n, ix, iv) =
                    mult[static_cast<std::size_t>(iv)] * f.at(n, ix, iv);
    return out;
}

namespace detail {

/// Discrete transport term (d_t + v.grad_x) f, realized as the full symbol
/// application minus the fractional velocity multiplier.
inline SpectralField transport_of(const SpectralField& f,
                                  const KineticParams& params, int threads) {
    SpectralField out = apply_symbol(f, 1, params, threads);
    const SpectralField diff = fractional_v_laplacian(f, params.beta);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] -= diff.values[i];
    return out;
}

inline double l2t_l2_value(const SpectralField& f,
                           const KineticParams& params) {
    return norm_result(f, NormSpace::l2t_l2(), params).value;
}

}  // namespace detail

/// Relative mismatch between the claimed decomposition of (d_t + v.grad_x) f
/// and the discretely computed transport term.  Zero when both vanish.
inline double transport_residual(const SpectralField& f,
                                 const SourceDecomposition& decomp,
                                 const KineticParams& params, int threads = 1) {
    const SpectralField ref = detail::transport_of(f, params, threads);
    SpectralField sum(f.grid, Frame::Physical);
    for (const auto* p : {&decomp.s1, &decomp.s2, &decomp.s3}) {
        if (!p->has_value()) continue;
        require_same_layout(**p, f, "transport_residual");
        if ((*p)->frame != Frame::Physical)
            throw ConfigError("transport_residual: parts must be physical-frame");
        for (std::size_t i = 0; i < sum.values.size(); ++i)
            sum.values[i] += (*p)->values[i];
    }
    SpectralField diff = sum;
    for (std::size_t i = 0; i < diff.values.size(); ++i)
        diff.values[i] -= ref.values[i];
    const double dn = detail::l2t_l2_value(diff, params);
    const double scale = std::max(detail::l2t_l2_value(ref, params),
                                  detail::l2t_l2_value(sum, params));
    return scale > 0.0 ? dn / scale : 0.0;
}

/// Residual gate shared by the diagnostics entry points.
inline void require_transport_decomposition(const SpectralField& f,
                                            const SourceDecomposition& decomp,
                                            const KineticParams& params,
                                            int threads = 1,
                                            double tol = 1e-8) {
    const double r = transport_residual(f, decomp, params, threads);
    if (!(r <= tol))
        throw ToleranceError(
            "transport decomposition does not match the field: residual " +
            std::to_string(r));
}

/// Embedding inequality report: position regularity and sup-in-time control
/// of f against the velocity regularity and the decomposition part norms.
/// The optional kappa block records the integrability gain
/// kappa = 1 + beta/((beta+1) d) with its scale-invariant constant.
struct EmbeddingReport {
    double lhs_sup_t = 0.0;  ///< sup over slices of the L2 slice norm
    double lhs_dx = 0.0;     ///< |D_x^{beta/(2 beta+1)} f| in L2
    double rhs_dv = 0.0;     ///< |D_v^beta f| in L2
    double rhs_s1 = 0.0;     ///< |S1| in L2_t Hdot_v^{-beta}
    double rhs_s2 = 0.0;     ///< |S2| in L2_t Hdot_x^{-beta/(2 beta+1)}
    double rhs_s3 = 0.0;     ///< |S3| in L1_t L2
    double ratio = 0.0;      ///< lhs sum over rhs sum; NaN when rhs is zero
    double decomposition_residual = 0.0;
    bool violation = false;  ///< ratio exceeded the configured ceiling

    struct KappaCheck {
        double kappa = 0.0;
        double lebesgue_norm = 0.0;  ///< |f| in L^{2 kappa} over (t, x, v)
        double constant = 0.0;       ///< lebesgue_norm / rhs sum; NaN when rhs is zero
    };
    std::optional<KappaCheck> kappa_check;

    /// sup_t |f|^2 against 2 |D_v f| |S1| for single-part decompositions.
    double multiplicative_ratio() const {
        const double denom = 2.0 * rhs_dv * rhs_s1;
        if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        return lhs_sup_t * lhs_sup_t / denom;
    }
};

namespace detail {

/// Part norm with the degenerate modes excluded.  Mass on those modes is
/// discretization noise for decompositions built from the discrete transport
/// term, so up to 1e-3 of the part's L2 size is tolerated; more means the
/// part genuinely fails to live in its claimed space.
inline double part_norm(const SpectralField& part, const NormSpace& space,
                        const KineticParams& params, const char* who) {
    const NormResult r = norm_result(part, space, params);
    if (r.excluded_mass > 1e-3 * r.l2_mass)
        throw ToleranceError(std::string(who) +
                             ": substantial mass on degenerate modes, norm undefined");
    return r.value;
}

/// L^p norm over (t, x, v): physical samples per slice, trapezoid in time.
inline double lebesgue_norm(const SpectralField& f, double p) {
    const PhaseGrid& g = f.grid;
    double cell = 1.0;
    for (int a = 0; a < g.dim; ++a) cell *= g.dx() * g.dv();
    std::vector<cplx> phys(static_cast<std::size_t>(g.slice_size()));
    double acc = 0.0;
    for (int n = 0; n < g.n_slices(); ++n) {
        auto s = f.slice(n);
        std::copy(s.begin(), s.end(), phys.begin());
        fft::slice_to_physical(phys.data(), g);
        double slice_sum = 0.0;
        for (const cplx& z : phys) slice_sum += std::pow(std::abs(z), p);
        const bool edge = n == 0 || n == g.n_t;
        acc += (edge ? 0.5 : 1.0) * slice_sum * cell;
    }
    return std::pow(acc * g.dt(), 1.0 / p);
}

}  // namespace detail

/// Builds the embedding report for a field and its transport decomposition.
/// The decomposition must reproduce the discrete (d_t + v.grad_x) f to the
/// gate tolerance; parts are measured in their natural spaces.
inline EmbeddingReport embedding_report(
    const SpectralField& f, const SourceDecomposition& decomp,
    const KineticParams& params,
    double ratio_ceiling = std::numeric_limits<double>::infinity(),
    int threads = 1) {
    params.validate();
    if (f.frame != Frame::Physical)
        throw ConfigError("embedding_report expects a physical-frame field");
    if (f.grid.dim != params.dim)
        throw ConfigError("embedding_report: grid and parameter dimensions differ");
    EmbeddingReport rep;
    rep.decomposition_residual = transport_residual(f, decomp, params, threads);
    if (!(rep.decomposition_residual <= 1e-8))
        throw ToleranceError(
            "transport decomposition does not match the field: residual " +
            std::to_string(rep.decomposition_residual));

    rep.lhs_sup_t = norm_result(f, NormSpace::sup_l2(), params).value;
    rep.lhs_dx =
        norm_result(f, NormSpace::l2t_hdot_x(params.s_x()), params).value;
    rep.rhs_dv =
        norm_result(f, NormSpace::l2t_hdot_v(params.beta), params).value;
    if (decomp.s1)
        rep.rhs_s1 = detail::part_norm(
            *decomp.s1, NormSpace::l2t_hdot_v(-params.beta), params, "S1");
    if (decomp.s2)
        rep.rhs_s2 = detail::part_norm(
            *decomp.s2, NormSpace::l2t_hdot_x(-params.s_x()), params, "S2");
    if (decomp.s3)
        rep.rhs_s3 = norm_result(*decomp.s3, NormSpace::l1t_l2(), params).value;

    const double denom = rep.rhs_dv + rep.rhs_s1 + rep.rhs_s2 + rep.rhs_s3;
    const double numer = rep.lhs_sup_t + rep.lhs_dx;
    rep.ratio = denom > 0.0 ? numer / denom
                            : std::numeric_limits<double>::quiet_NaN();

    EmbeddingReport::KappaCheck kc;
    kc.kappa = 1.0 + params.beta / ((params.beta + 1.0) * params.dim);
    kc.lebesgue_norm = detail::lebesgue_norm(f, 2.0 * kc.kappa);
    kc.constant = denom > 0.0 ? kc.lebesgue_norm / denom
                              : std::numeric_limits<double>::quiet_NaN();
    rep.kappa_check = kc;

    rep.violation = std::isfinite(ratio_ceiling) && std::isfinite(rep.ratio) &&
                    rep.ratio > ratio_ceiling;
    return rep;
}

/// Per-slice comparison of the centered difference of |f(t)|^2 against twice
/// the real pairing of the decomposition with f.  Interior slices only; for
/// smooth data the mismatch shrinks at second order in dt.
struct AbsContReport {
    double max_mismatch = 0.0;
    double scale = 0.0;  ///< largest |d/dt |f|^2| seen, for relative context
    std::vector<double> mismatch;  ///< one entry per interior slice
};

inline AbsContReport absolute_continuity_check(const SpectralField& f,
                                               const SourceDecomposition& decomp,
                                               const KineticParams& params,
                                               int threads = 1) {
    params.validate();
    if (f.frame != Frame::Physical)
        throw ConfigError("absolute_continuity_check expects a physical-frame field");
    require_transport_decomposition(f, decomp, params, threads);
    const PhaseGrid& g = f.grid;
    if (g.n_t < 2)
        throw ConfigError("absolute_continuity_check needs at least three slices");
    const double dt = g.dt();
    AbsContReport rep;
    for (int n = 1; n < g.n_t; ++n) {
        const double lhs =
            (f.l2_sq_slice(n + 1) - f.l2_sq_slice(n - 1)) / (2.0 * dt);
        double rhs = 0.0;
        for (const auto* p : {&decomp.s1, &decomp.s2, &decomp.s3})
            if (p->has_value())
                rhs += 2.0 * duality_pairing_slice(**p, f, n).real();
        rep.mismatch.push_back(std::abs(lhs - rhs));
        rep.scale = std::max({rep.scale, std::abs(lhs), std::abs(rhs)});
    }
    rep.max_mismatch =
        rep.mismatch.empty()
            ? 0.0
            : *std::max_element(rep.mismatch.begin(), rep.mismatch.end());
    return rep;
}

}  // namespace kfp
