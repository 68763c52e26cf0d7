#pragma once

#include <fftw3.h>

#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include "kfp/field.hpp"

// Thin FFTW layer implementing the transform convention
//   f_hat(k) = dx * sum_j f(x_j) e^{-i x_j freq_k},   x_j = -L + j dx,
// so mode coefficients approximate the continuum transform on [-L, L) and
// Plancherel holds with slice weight (2L)^{-1} per axis. The offset -L shows
// up as the parity factor (-1)^k next to the raw DFT.

namespace kfp::fft {

namespace detail {

struct AlignedBuf {
    fftw_complex* p = nullptr;
    std::size_t n = 0;
    ~AlignedBuf() { if (p) fftw_free(p); }
    void ensure(std::size_t len) {
        if (n >= len) return;
        if (p) fftw_free(p);
        p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * len));
        n = len;
    }
};

inline fftw_plan plan_for(int n, int sign) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, fftw_plan> cache;
    std::scoped_lock lock(mu);
    auto it = cache.find({n, sign});
    if (it != cache.end()) return it->second;
    AlignedBuf tmp;
    tmp.ensure(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, tmp.p, tmp.p, sign, FFTW_ESTIMATE);
    cache.emplace(std::pair<int, int>{n, sign}, p);
    return p;
}

inline AlignedBuf& scratch(std::size_t len) {
    thread_local AlignedBuf buf;
    buf.ensure(len);
    return buf;
}

}  // namespace detail

/// In-place unnormalized DFT along one axis of a flattened row-major block.
/// The axis has extent n and stride `stride`; `total` is the block length.
inline void raw_dft_axis(cplx* data, std::int64_t total, int n,
                         std::int64_t stride, int sign) {
    fftw_plan plan = detail::plan_for(n, sign);
    auto& buf = detail::scratch(static_cast<std::size_t>(n));
    const std::int64_t block = static_cast<std::int64_t>(n) * stride;
    for (std::int64_t base = 0; base < total; base += block) {
        for (std::int64_t inner = 0; inner < stride; ++inner) {
            cplx* start = data + base + inner;
            for (int k = 0; k < n; ++k) {
                const cplx z = start[static_cast<std::int64_t>(k) * stride];
                buf.p[k][0] = z.real();
                buf.p[k][1] = z.imag();
            }
            fftw_execute_dft(plan, buf.p, buf.p);
            for (int k = 0; k < n; ++k)
                start[static_cast<std::int64_t>(k) * stride] =
                    cplx(buf.p[k][0], buf.p[k][1]);
        }
    }
}

/// Modes -> physical samples along one axis (exact inverse of the convention
/// above): scale by (-1)^k, backward DFT, divide by 2L.
inline void axis_modes_to_physical(cplx* data, std::int64_t total, int n,
                                   std::int64_t stride, double half_len) {
    const std::int64_t block = static_cast<std::int64_t>(n) * stride;
    for (std::int64_t base = 0; base < total; base += block)
        for (int k = 1; k < n; k += 2)
            for (std::int64_t inner = 0; inner < stride; ++inner)
                data[base + static_cast<std::int64_t>(k) * stride + inner] *= -1.0;
    raw_dft_axis(data, total, n, stride, FFTW_BACKWARD);
    const double scale = 1.0 / (2.0 * half_len);
    for (std::int64_t i = 0; i < total; ++i) data[i] *= scale;
}

/// Physical samples -> modes along one axis.
inline void axis_physical_to_modes(cplx* data, std::int64_t total, int n,
                                   std::int64_t stride, double half_len) {
    raw_dft_axis(data, total, n, stride, FFTW_FORWARD);
    const double dx = 2.0 * half_len / n;
    const std::int64_t block = static_cast<std::int64_t>(n) * stride;
    for (std::int64_t base = 0; base < total; base += block)
        for (int k = 0; k < n; ++k) {
            const double f = (k % 2 == 0) ? dx : -dx;
            for (std::int64_t inner = 0; inner < stride; ++inner)
                data[base + static_cast<std::int64_t>(k) * stride + inner] *= f;
        }
}

/// Transforms all axes of a slice from mode space to physical samples.
inline void slice_to_physical(cplx* slice, const PhaseGrid& g) {
    const std::int64_t total = g.slice_size();
    std::int64_t stride = 1;
    for (int a = 0; a < g.dim; ++a) {
        axis_modes_to_physical(slice, total, g.n_v, stride, g.half_len_v);
        stride *= g.n_v;
    }
    for (int a = 0; a < g.dim; ++a) {
        axis_modes_to_physical(slice, total, g.n_x, stride, g.half_len_x);
        stride *= g.n_x;
    }
}

/// Inverse of slice_to_physical.
inline void slice_from_physical(cplx* slice, const PhaseGrid& g) {
    const std::int64_t total = g.slice_size();
    std::int64_t stride = 1;
    for (int a = 0; a < g.dim; ++a) {
        axis_physical_to_modes(slice, total, g.n_v, stride, g.half_len_v);
        stride *= g.n_v;
    }
    for (int a = 0; a < g.dim; ++a) {
        axis_physical_to_modes(slice, total, g.n_x, stride, g.half_len_x);
        stride *= g.n_x;
    }
}

/// v-axes only: mode space -> physical v samples (x stays in modes).
inline void slice_v_to_physical(cplx* slice, const PhaseGrid& g) {
    const std::int64_t total = g.slice_size();
    std::int64_t stride = 1;
    for (int a = 0; a < g.dim; ++a) {
        axis_modes_to_physical(slice, total, g.n_v, stride, g.half_len_v);
        stride *= g.n_v;
    }
}

/// v-axes only: physical v samples -> mode space.
inline void slice_v_from_physical(cplx* slice, const PhaseGrid& g) {
    const std::int64_t total = g.slice_size();
    std::int64_t stride = 1;
    for (int a = 0; a < g.dim; ++a) {
        axis_physical_to_modes(slice, total, g.n_v, stride, g.half_len_v);
        stride *= g.n_v;
    }
}

}  // namespace kfp::fft
