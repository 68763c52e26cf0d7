#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/field.hpp"
#include "kfp/grid.hpp"

namespace kfp {

/// Smooth time envelope, exactly zero outside [t0, t1] (sin^2 arch inside).
/// The hard zeros make causality checks meaningful: slices before t0 carry
/// no rounding residue at all.
struct TimeWindow {
    double t0 = 0.0;
    double t1 = 0.0;

    void validate() const {
        if (!(t0 < t1) || !std::isfinite(t0) || !std::isfinite(t1))
            throw ConfigError("TimeWindow: need finite t0 < t1");
    }

    double value(double t) const {
        if (!(t > t0) || !(t < t1)) return 0.0;
        const double s = std::sin(std::numbers::pi * (t - t0) / (t1 - t0));
        return s * s;
    }
};

/// Builtin generator request.  Every generator is deterministic in its
/// parameters and seed and keeps the band away from the degenerate modes
/// (the |phi| = 0 and |xi| = 0 hyperplanes), so the negative-order weighted
/// norms of the output are always defined.
struct SourceSpec {
    enum class Kind { SingleMode, RandomBandLimited, GaussianBumpModes };

    Kind kind = Kind::SingleMode;
    double amplitude = 1.0;

    /// SingleMode: signed lattice indices of the one occupied (phi, xi) pair.
    std::array<int, 3> mode_x{};
    std::array<int, 3> mode_v{};

    /// RandomBandLimited: occupied iff band_lo <= max_a |k_a| <= band_hi on
    /// both the x and v axes; coefficients drawn once per mode from `seed`.
    int band_lo = 1;
    int band_hi = 8;
    std::uint64_t seed = 1;

    /// GaussianBumpModes: exp(-(|k|^2+|m|^2)/(2 width^2)) up to max-norm
    /// `cutoff`, zero on the degenerate hyperplanes; real and even, so the
    /// represented function is real-valued.
    double width = 2.0;
    int cutoff = 8;

    /// Optional window; unset means a constant envelope of 1 on every slice.
    bool windowed = false;
    TimeWindow window;

    void validate(const PhaseGrid& g) const {
        g.validate();
        if (!std::isfinite(amplitude))
            throw ConfigError("SourceSpec: amplitude must be finite");
        switch (kind) {
            case Kind::SingleMode:
                for (int a = 0; a < g.dim; ++a) {
                    if (mode_x[static_cast<std::size_t>(a)] < -g.n_x / 2 ||
                        mode_x[static_cast<std::size_t>(a)] >= g.n_x / 2 ||
                        mode_v[static_cast<std::size_t>(a)] < -g.n_v / 2 ||
                        mode_v[static_cast<std::size_t>(a)] >= g.n_v / 2)
                        throw ConfigError("SourceSpec: mode index outside the lattice");
                }
                break;
            case Kind::RandomBandLimited:
                if (band_lo < 1 || band_hi < band_lo)
                    throw ConfigError("SourceSpec: need 1 <= band_lo <= band_hi");
                if (band_hi >= g.n_v / 2 || band_hi >= g.n_x / 2)
                    throw ConfigError("SourceSpec: band exceeds the lattice half-width");
                break;
            case Kind::GaussianBumpModes:
                if (!(width > 0.0))
                    throw ConfigError("SourceSpec: width must be positive");
                if (cutoff < 1 || cutoff >= g.n_v / 2 || cutoff >= g.n_x / 2)
                    throw ConfigError("SourceSpec: cutoff outside the lattice half-width");
                break;
        }
        if (windowed) window.validate();
    }
};

namespace detail {

/// Flat slice offset of the signed mode multi-index (kx, kv).
inline std::int64_t mode_offset(const PhaseGrid& g, const std::array<int, 3>& kx,
                                const std::array<int, 3>& kv) {
    std::int64_t ix = 0, iv = 0;
    for (int a = 0; a < g.dim; ++a) {
        const int jx = kx[static_cast<std::size_t>(a)] >= 0
                           ? kx[static_cast<std::size_t>(a)]
                           : kx[static_cast<std::size_t>(a)] + g.n_x;
        const int jv = kv[static_cast<std::size_t>(a)] >= 0
                           ? kv[static_cast<std::size_t>(a)]
                           : kv[static_cast<std::size_t>(a)] + g.n_v;
        ix = ix * g.n_x + jx;
        iv = iv * g.n_v + jv;
    }
    return ix * g.modes_v() + iv;
}

/// Enumerates signed multi-indices with max-norm within [lo, hi], in a fixed
/// lexicographic order so coefficient draws are reproducible.
inline void banded_indices(int dim, int n, int lo, int hi,
                           std::vector<std::array<int, 3>>& out) {
    out.clear();
    const int half = n / 2;
    std::array<int, 3> k{};
    auto max_abs = [&]() {
        int m = 0;
        for (int a = 0; a < dim; ++a)
            m = std::max(m, std::abs(k[static_cast<std::size_t>(a)]));
        return m;
    };
    std::vector<int> cur(static_cast<std::size_t>(dim), -half + 1);
    for (;;) {
        for (int a = 0; a < dim; ++a) k[static_cast<std::size_t>(a)] = cur[static_cast<std::size_t>(a)];
        const int m = max_abs();
        if (m >= lo && m <= hi) out.push_back(k);
        int a = dim - 1;
        for (; a >= 0; --a) {
            if (++cur[static_cast<std::size_t>(a)] < half) break;
            cur[static_cast<std::size_t>(a)] = -half + 1;
        }
        if (a < 0) return;
    }
}

}  // namespace detail

/// Builds the generator's field on the grid: a fixed mode pattern scaled by
/// the time envelope on every slice.  Physical-frame output.
inline SpectralField generate_source(const SourceSpec& spec, const PhaseGrid& g) {
    spec.validate(g);
    SpectralField f(g, Frame::Physical);

    std::vector<std::int64_t> offs;
    std::vector<cplx> coef;
    switch (spec.kind) {
        case SourceSpec::Kind::SingleMode: {
            offs.push_back(detail::mode_offset(g, spec.mode_x, spec.mode_v));
            coef.emplace_back(spec.amplitude);
            break;
        }
        case SourceSpec::Kind::RandomBandLimited: {
            std::vector<std::array<int, 3>> kxs, kvs;
            detail::banded_indices(g.dim, g.n_x, spec.band_lo, spec.band_hi, kxs);
            detail::banded_indices(g.dim, g.n_v, spec.band_lo, spec.band_hi, kvs);
            std::mt19937_64 rng(spec.seed);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            // draw the conjugate pair together: c at (k, m), conj(c) at (-k, -m)
            for (const auto& kx : kxs)
                for (const auto& kv : kvs) {
                    int first_sign = 0;
                    for (int a = 0; a < g.dim && first_sign == 0; ++a)
                        if (kx[static_cast<std::size_t>(a)] != 0)
                            first_sign = kx[static_cast<std::size_t>(a)] > 0 ? 1 : -1;
                    for (int a = 0; a < g.dim && first_sign == 0; ++a)
                        if (kv[static_cast<std::size_t>(a)] != 0)
                            first_sign = kv[static_cast<std::size_t>(a)] > 0 ? 1 : -1;
                    if (first_sign <= 0) continue;
                    const cplx c(u(rng), u(rng));
                    std::array<int, 3> nkx{}, nkv{};
                    for (int a = 0; a < 3; ++a) {
                        nkx[static_cast<std::size_t>(a)] = -kx[static_cast<std::size_t>(a)];
                        nkv[static_cast<std::size_t>(a)] = -kv[static_cast<std::size_t>(a)];
                    }
                    offs.push_back(detail::mode_offset(g, kx, kv));
                    coef.push_back(spec.amplitude * c);
                    offs.push_back(detail::mode_offset(g, nkx, nkv));
                    coef.push_back(spec.amplitude * std::conj(c));
                }
            break;
        }
        case SourceSpec::Kind::GaussianBumpModes: {
            std::vector<std::array<int, 3>> kxs, kvs;
            detail::banded_indices(g.dim, g.n_x, 1, spec.cutoff, kxs);
            detail::banded_indices(g.dim, g.n_v, 1, spec.cutoff, kvs);
            for (const auto& kx : kxs)
                for (const auto& kv : kvs) {
                    double sq = 0.0;
                    for (int a = 0; a < g.dim; ++a) {
                        sq += static_cast<double>(kx[static_cast<std::size_t>(a)] *
                                                  kx[static_cast<std::size_t>(a)]);
                        sq += static_cast<double>(kv[static_cast<std::size_t>(a)] *
                                                  kv[static_cast<std::size_t>(a)]);
                    }
                    offs.push_back(detail::mode_offset(g, kx, kv));
                    coef.emplace_back(spec.amplitude *
                                      std::exp(-sq / (2.0 * spec.width * spec.width)));
                }
            break;
        }
    }

    const std::int64_t stride = g.slice_size();
    for (int n = 0; n < g.n_slices(); ++n) {
        const double env = spec.windowed ? spec.window.value(g.t_at(n)) : 1.0;
        if (env == 0.0) continue;
        for (std::size_t i = 0; i < offs.size(); ++i)
            f.values[static_cast<std::size_t>(n * stride + offs[i])] +=
                env * coef[i];
    }
    return f;
}

}  // namespace kfp
