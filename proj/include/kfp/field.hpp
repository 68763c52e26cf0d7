#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kfp/grid.hpp"

namespace kfp {

using cplx = std::complex<double>;

/// Physical: values are modes of f itself. Galilean: values are modes of the
/// sheared function, mode(t, phi, xi) = f_hat(t, phi, xi - t*phi).
enum class Frame { Physical, Galilean };

inline const char* frame_name(Frame f) {
    return f == Frame::Physical ? "physical" : "galilean";
}

/// Complex mode array indexed (time, phi-mode, xi-mode), flattened time-major.
struct SpectralField {
    PhaseGrid grid;
    Frame frame = Frame::Physical;
    std::vector<cplx> values;

    SpectralField() = default;
    SpectralField(const PhaseGrid& g, Frame fr) : grid(g), frame(fr) {
        g.validate();
        values.assign(static_cast<std::size_t>(g.total_size()), cplx(0.0));
    }

    std::int64_t index(int t, std::int64_t ix, std::int64_t iv) const {
        return (static_cast<std::int64_t>(t) * grid.modes_x() + ix) * grid.modes_v() + iv;
    }
    cplx& at(int t, std::int64_t ix, std::int64_t iv) {
        return values[static_cast<std::size_t>(index(t, ix, iv))];
    }
    const cplx& at(int t, std::int64_t ix, std::int64_t iv) const {
        return values[static_cast<std::size_t>(index(t, ix, iv))];
    }

    std::span<cplx> slice(int t) {
        return {values.data() + t * grid.slice_size(),
                static_cast<std::size_t>(grid.slice_size())};
    }
    std::span<const cplx> slice(int t) const {
        return {values.data() + t * grid.slice_size(),
                static_cast<std::size_t>(grid.slice_size())};
    }

    /// Squared L^2_{x,v} norm of one time slice via Plancherel weights.
    double l2_sq_slice(int t) const {
        double acc = 0.0;
        for (const cplx& z : slice(t)) acc += std::norm(z);
        return acc * grid.mode_weight();
    }

    /// Worst relative Hermitian-symmetry violation over all slices; 0 for a
    /// mode array representing a real-valued function.
    double hermitian_error() const {
        double worst = 0.0;
        double scale = 0.0;
        for (const cplx& z : values) scale = std::max(scale, std::abs(z));
        if (scale == 0.0) return 0.0;
        for (int n = 0; n < grid.n_slices(); ++n) {
            for (std::int64_t ix = 0; ix < grid.modes_x(); ++ix) {
                const std::int64_t jx = grid.negated_x(ix);
                for (std::int64_t iv = 0; iv < grid.modes_v(); ++iv) {
                    const std::int64_t jv = grid.negated_v(iv);
                    const cplx diff = at(n, ix, iv) - std::conj(at(n, jx, jv));
                    worst = std::max(worst, std::abs(diff));
                }
            }
        }
        return worst / scale;
    }
};

inline void require_same_layout(const SpectralField& a, const SpectralField& b,
                                const char* who) {
    if (!(a.grid == b.grid))
        throw ConfigError(std::string(who) + ": grid mismatch");
    if (a.frame != b.frame)
        throw ConfigError(std::string(who) + ": frame mismatch");
}

/// Source split S = S1 + S2 + S3, each part carrying its own norm space
/// (S1 in L2_t Hdot_v^{-beta}, S2 in L2_t Hdot_x^{-beta/(2beta+1)},
/// S3 in L1_t L2).
struct SourceDecomposition {
    std::optional<SpectralField> s1, s2, s3;

    void validate() const {
        const SpectralField* first = nullptr;
        for (const auto* p : {&s1, &s2, &s3}) {
            if (!p->has_value()) continue;
            if (!first) {
                first = &**p;
            } else {
                require_same_layout(*first, **p, "SourceDecomposition");
            }
        }
        if (!first)
            throw ConfigError("SourceDecomposition: at least one part required");
    }

    const SpectralField& any() const {
        if (s1) return *s1;
        if (s2) return *s2;
        if (s3) return *s3;
        throw ConfigError("SourceDecomposition: empty");
    }

    /// Pointwise sum of the present parts.
    SpectralField sum() const {
        validate();
        SpectralField out(any().grid, any().frame);
        for (const auto* p : {&s1, &s2, &s3}) {
            if (!p->has_value()) continue;
            const auto& src = (*p)->values;
            for (std::size_t i = 0; i < src.size(); ++i) out.values[i] += src[i];
        }
        return out;
    }
};

}  // namespace kfp
