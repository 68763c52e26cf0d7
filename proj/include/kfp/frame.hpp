#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "kfp/fft.hpp"
#include "kfp/field.hpp"

namespace kfp {

/// Set when some time slice shears modes past the representable v-band, so
/// the periodic wrap folds them back (trigonometric interpolation is then no
/// longer the continuum shear).
struct AliasReport {
    bool aliased = false;
    double worst_shift = 0.0;  // max |t| * phi_max over slices
};

namespace detail {

/// Applies exp(i sign t phi . v) to one slice held as (x-modes, v-physical).
inline void shear_phase_slice(cplx* slice, const PhaseGrid& g, double t,
                              double sign) {
    std::array<double, 3> phi{};
    std::vector<int> vidx(static_cast<std::size_t>(g.dim), 0);
    const std::int64_t mx = g.modes_x(), mv = g.modes_v();
    for (std::int64_t ix = 0; ix < mx; ++ix) {
        g.phi_at(ix, phi);
        std::fill(vidx.begin(), vidx.end(), 0);
        for (std::int64_t iv = 0; iv < mv; ++iv) {
            double pv = 0.0;
            for (int a = 0; a < g.dim; ++a)
                pv += phi[static_cast<std::size_t>(a)] *
                      g.v_at(vidx[static_cast<std::size_t>(a)]);
            slice[ix * mv + iv] *= std::polar(1.0, sign * t * pv);
            for (int a = g.dim - 1; a >= 0; --a) {
                auto& c = vidx[static_cast<std::size_t>(a)];
                if (++c < g.n_v) break;
                c = 0;
            }
        }
    }
}

}  // namespace detail

/// Re-expresses one time slice (given as a mode array) in the other frame by
/// the exact band-limited shear: v-modes -> v-samples, multiply by the unit
/// phase exp(+-i t phi . v), back to v-modes.
inline void convert_slice_frame(cplx* slice, const PhaseGrid& g, double t,
                                Frame from, Frame to) {
    if (from == to || t == 0.0) return;
    const double sign = (to == Frame::Galilean) ? 1.0 : -1.0;
    fft::slice_v_to_physical(slice, g);
    detail::shear_phase_slice(slice, g, t, sign);
    fft::slice_v_from_physical(slice, g);
}

/// Frame change for a whole field. The shear preserves the slice L^2 norm
/// exactly (unit-modulus multipliers); out-of-band shear wraps periodically
/// and is reported through `alias`.
inline SpectralField to_frame(const SpectralField& f, Frame target,
                              AliasReport* alias = nullptr) {
    f.grid.validate();
    SpectralField out = f;
    if (alias) *alias = AliasReport{};
    if (f.frame == target) return out;
    for (int n = 0; n < f.grid.n_slices(); ++n) {
        const double t = f.grid.t_at(n);
        convert_slice_frame(out.slice(n).data(), f.grid, t, f.frame, target);
        if (alias) {
            const double shift = std::abs(t) * f.grid.phi_max();
            alias->worst_shift = std::max(alias->worst_shift, shift);
            if (shift > f.grid.xi_max()) alias->aliased = true;
        }
    }
    out.frame = target;
    return out;
}

}  // namespace kfp
